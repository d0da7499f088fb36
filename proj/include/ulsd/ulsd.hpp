#pragma once

#include "ulsd/annotation.hpp"
#include "ulsd/bezier.hpp"
#include "ulsd/bezier_align.hpp"
#include "ulsd/camera.hpp"
#include "ulsd/error.hpp"
#include "ulsd/fitting_sweep.hpp"
#include "ulsd/geometry.hpp"
#include "ulsd/grid_codec.hpp"
#include "ulsd/io.hpp"
#include "ulsd/losses.hpp"
#include "ulsd/metrics.hpp"
#include "ulsd/planes.hpp"
#include "ulsd/proposal.hpp"
#include "ulsd/synth.hpp"
#include "ulsd/tensor_file.hpp"
