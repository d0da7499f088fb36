// ulsd: command-line front end for the line segment toolkit.
//
// Exit codes: 0 success, 2 invalid input, 3 internal numerical failure.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "ulsd/ulsd.hpp"

namespace fs = std::filesystem;
using namespace ulsd;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

// Runs fn(i) for i in [0, n) on up to ULSD_THREADS workers. The first
// failing index (not the first failure in time) is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, Fn fn) {
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ULSD_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) workers = std::min(workers, static_cast<std::size_t>(cap));
  }
  workers = std::min(workers, std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(n);
  std::mutex mu;
  std::size_t next = 0;
  auto work = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= n) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::pair<std::size_t, std::size_t> parse_dims(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x != std::string::npos) return {std::stoul(s.substr(0, x)), std::stoul(s.substr(x + 1))};
    const auto v = std::stoul(s);
    return {v, v};
  } catch (const std::exception&) {
    throw ValidationError("bad size '" + s + "' (expected WxH or N)");
  }
}

std::string format_number(double v) {
  std::ostringstream ss;
  ss << std::setprecision(9) << v;
  return ss.str();
}

void emit(const std::string& text, const std::string& output) {
  if (output.empty() || output == "-") {
    std::cout << text;
  } else {
    write_text_atomic(output, text);
  }
}

Polyline read_polyline(const std::string& input) {
  std::string text;
  if (input == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    text = ss.str();
  } else {
    text = read_text(input);
  }
  const auto j = parse_json<Json>(text, input);
  return detail::points_from(j.is_object() ? detail::field(j, "points") : j);
}

Json point_json(const Point2& p) { return Json::array({p.x, p.y}); }

// --- fit -------------------------------------------------------------------

struct FitArgs {
  std::string input = "-";
  std::string output;
  std::size_t order = 2;
  std::string params = "uniform";
  bool pin = false;
};

void run_fit(const FitArgs& a) {
  const auto samples = read_polyline(a.input);
  const FitOptions opts{parse_param_mode(a.params), a.pin};
  const auto fit = fit_polyline(samples, a.order, opts);
  Json j;
  j["order"] = fit.curve.order();
  j["params"] = to_string(opts.params);
  j["control_points"] = Json::array();
  for (const auto& p : fit.curve.control_points()) j["control_points"].push_back(point_json(p));
  j["points"] = Json::array();
  const auto eq = to_equipartition(fit.curve);
  for (const auto& p : eq.points()) j["points"].push_back(point_json(p));
  j["report"] = {{"mean_error", fit.report.mean_error},
                 {"max_error", fit.report.max_error},
                 {"per_point_errors", fit.report.per_point_errors}};
  emit(dump(j), a.output);
}

// --- fit-sweep ---------------------------------------------------------------

struct SweepArgs {
  std::size_t segments = 1000;
  std::uint64_t seed = 0;
  std::size_t samples = kDefaultDistortionSamples;
  std::string params = "uniform";
  std::string camera;
  std::string output;
};

void run_fit_sweep(const SweepArgs& a) {
  FittingSweepOptions o;
  o.segments = a.segments;
  o.seed = a.seed;
  o.samples = a.samples;
  o.fit.params = parse_param_mode(a.params);
  if (!a.camera.empty()) {
    const auto cam = read_camera(a.camera);
    const auto* f = std::get_if<FisheyeIntrinsics>(&cam);
    if (!f) throw ValidationError("fit-sweep expects a fisheye camera config");
    o.fisheye = *f;
  }
  const auto r = run_fitting_sweep(o);
  std::ostringstream csv;
  csv << "order,fisheye_mean,fisheye_max,spherical_mean,spherical_max\n";
  for (std::size_t i = 0; i < r.fisheye.size(); ++i) {
    csv << r.fisheye[i].order << ',' << format_number(r.fisheye[i].mean_error) << ','
        << format_number(r.fisheye[i].max_error) << ',' << format_number(r.spherical[i].mean_error) << ','
        << format_number(r.spherical[i].max_error) << '\n';
  }
  emit(csv.str(), a.output);
}

// --- synth -------------------------------------------------------------------

struct SynthArgs {
  std::string input;
  std::string camera;
  std::string output;
  std::size_t order = 2;
  std::size_t samples = kDefaultDistortionSamples;
  std::string params = "uniform";
  bool pin = false;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

void run_synth(const SynthArgs& a) {
  CameraModel cam = read_camera(a.camera);
  const auto names = dataset_names(a.input);
  fs::create_directories(a.output);
  SynthOptions opts{a.order, a.samples, {parse_param_mode(a.params), a.pin}};

  std::vector<SynthResult> results(names.size());
  parallel_for(names.size(), [&](std::size_t i) {
    CameraModel image_cam = cam;
    if (a.noise > 0.0) {
      const auto* f = std::get_if<FisheyeIntrinsics>(&cam);
      if (!f) throw ValidationError("--noise applies to fisheye cameras only");
      std::mt19937_64 rng(a.seed + i);
      image_cam = perturb_distortion(*f, a.noise, rng);
    }
    results[i] = synth_annotation(read_annotation(fs::path(a.input) / (names[i] + ".json")), image_cam, opts);
    write_annotation(fs::path(a.output) / (names[i] + ".json"), results[i].annotation);
  });

  Json stats = Json::object();
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& r = results[i];
    dropped += r.dropped_lines;
    stats[names[i]] = {{"dropped_lines", r.dropped_lines},
                       {"degenerate_lines", r.degenerate_lines},
                       {"partially_visible", r.partially_visible},
                       {"dropped_junctions", r.dropped_junctions}};
  }
  write_manifest(a.output, names, {{"synth", stats}, {"order", a.order}, {"camera", camera_to_json<Json>(cam)}});
  std::cerr << "synthesized " << names.size() << " annotations, dropped " << dropped << " out-of-view lines\n";
}

// --- encode / decode -----------------------------------------------------------

struct CodecArgs {
  std::string input;
  std::string output;
  std::string grid = "128x128";
  std::size_t order = 2;
  std::size_t top_k = kDefaultTopK;
  double min_conf = kDefaultMinConfidence;
  std::size_t nms_window = kDefaultNmsWindow;
  std::string dataset_type = "pinhole";
};

void run_encode(const CodecArgs& a) {
  const auto [gw, gh] = parse_dims(a.grid);
  const auto names = dataset_names(a.input);
  fs::create_directories(a.output);
  struct Info {
    std::size_t width = 0, height = 0, junction_collisions = 0, line_collisions = 0;
  };
  std::vector<Info> info(names.size());
  parallel_for(names.size(), [&](std::size_t i) {
    const auto ann = read_annotation(fs::path(a.input) / (names[i] + ".json"));
    const GridSpec spec(static_cast<std::size_t>(ann.image.width), static_cast<std::size_t>(ann.image.height), gw, gh);
    std::vector<EquipartitionLine> lines;
    bool wrap = a.dataset_type == "spherical";
    for (const auto& l : ann.lines) {
      lines.push_back(l.points);
      wrap = wrap || l.wrapped;
    }
    const auto j = encode_junctions(ann.junctions, spec);
    const auto l = encode_lines(lines, spec, a.order, {wrap});
    write_tensor(fs::path(a.output) / (names[i] + ".ultd"), pack_maps(j.maps, l.maps));
    info[i] = {spec.image_w(), spec.image_h(), j.collisions, l.collisions};
  });
  Json images = Json::object();
  std::size_t collisions = 0;
  for (std::size_t i = 0; i < names.size(); ++i) {
    images[names[i]] = {{"width", info[i].width},
                        {"height", info[i].height},
                        {"junction_collisions", info[i].junction_collisions},
                        {"line_collisions", info[i].line_collisions}};
    collisions += info[i].junction_collisions + info[i].line_collisions;
  }
  write_manifest(a.output, names, {{"grid", {gw, gh}}, {"order", a.order}, {"maps", images}});
  std::cerr << "encoded " << names.size() << " images, " << collisions << " bin collisions\n";
}

void run_decode(const CodecArgs& a) {
  const fs::path dir(a.input);
  const auto manifest = parse_json<Json>(read_text(dir / kManifestName), (dir / kManifestName).string());
  const auto names = dataset_names(dir);
  const auto& grid = detail::field(manifest, "grid");
  if (!grid.is_array() || grid.size() != 2) throw ValidationError("manifest 'grid' must be [width, height]");
  const std::size_t gw = detail::dimension(grid[0], "grid width");
  const std::size_t gh = detail::dimension(grid[1], "grid height");
  const std::size_t order = detail::dimension(detail::field(manifest, "order"), "order");
  const auto& maps = detail::field(manifest, "maps");
  DecodeOptions opts;
  opts.top_k = a.top_k;
  opts.min_confidence = a.min_conf;
  opts.nms_window = a.nms_window;
  opts.clamp = a.dataset_type != "spherical";

  std::vector<ImagePrediction> preds(names.size());
  parallel_for(names.size(), [&](std::size_t i) {
    const auto& m = detail::field(maps, names[i].c_str());
    const GridSpec spec(detail::dimension(detail::field(m, "width"), "width"),
                        detail::dimension(detail::field(m, "height"), "height"), gw, gh);
    const auto [jm, lm] = unpack_maps(read_tensor(dir / (names[i] + ".ultd")), order);
    preds[i].junctions = decode_junctions(jm, spec, opts);
    preds[i].lines = decode_lines(lm, spec, opts);
  });
  NamedPredictions out;
  for (std::size_t i = 0; i < names.size(); ++i) out.emplace(names[i], std::move(preds[i]));
  write_predictions(a.output, out);
}

// --- match / sample ------------------------------------------------------------

struct MatchArgs {
  std::string pred;
  std::string output;
  double radius = kDefaultMatchRadius;
};

void run_match(const MatchArgs& a) {
  auto preds = read_predictions(a.pred);
  for (auto& [name, p] : preds) {
    std::vector<LineProposal> kept;
    for (auto& m : match_lines_junctions(p.lines, p.junctions, a.radius)) {
      kept.push_back({std::move(m.points), m.confidence});
    }
    p.lines = std::move(kept);
  }
  write_predictions(a.output, preds);
}

struct SampleArgs {
  std::string pred;
  std::string gt;
  std::string output;
  double eta = kDefaultEta;
  std::size_t n_pos = 300;
  std::size_t n_neg = 40;
  std::optional<std::size_t> n_gt;
  std::uint64_t seed = 0;
};

void run_sample(const SampleArgs& a) {
  const auto preds = read_predictions(a.pred);
  Json out = Json::object();
  for (const auto& [name, ann] : read_dataset(a.gt)) {
    const auto it = preds.find(name);
    if (it == preds.end()) throw ValidationError("no predictions for image '" + name + "'");
    std::vector<EquipartitionLine> gt;
    for (const auto& l : ann.lines) gt.push_back(l.points);
    SampleOptions opts{a.eta, a.n_pos, a.n_neg, a.n_gt, a.seed};
    const auto r = sample_training_lines(it->second.lines, gt, opts);
    Json samples = Json::array();
    for (const auto& s : r.samples) {
      Json js;
      js["label"] = s.label == SampleLabel::kPositive ? 1 : 0;
      js["points"] = Json::array();
      for (const auto& p : s.line.points()) js["points"].push_back(point_json(p));
      js["distance"] = std::isfinite(s.distance) ? Json(s.distance) : Json(nullptr);
      js["matched_gt"] = s.matched_gt ? Json(*s.matched_gt) : Json(nullptr);
      js["proposal"] = s.proposal_index ? Json(*s.proposal_index) : Json(nullptr);
      samples.push_back(std::move(js));
    }
    out[name] = {{"samples", samples},
                 {"positive_shortfall", r.positive_shortfall},
                 {"negative_shortfall", r.negative_shortfall}};
  }
  emit(dump(Json{{"images", out}, {"eta", a.eta}, {"seed", a.seed}}), a.output);
}

// --- eval ----------------------------------------------------------------------

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string output;
  std::string dataset_type = "pinhole";
  double scale = kDefaultEvalScale;
};

std::string pr_svg(const EvalReport& r) {
  constexpr double kSize = 400.0;
  constexpr double kMargin = 50.0;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c"};
  std::ostringstream s;
  s << std::setprecision(6);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize + 2 * kMargin << "\" height=\""
    << kSize + 2 * kMargin << "\">\n";
  s << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kSize << "\" height=\"" << kSize
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  s << "<text x=\"" << kMargin + kSize / 2 << "\" y=\"" << kSize + 1.7 * kMargin
    << "\" text-anchor=\"middle\">Recall</text>\n";
  s << "<text x=\"" << kMargin / 3 << "\" y=\"" << kMargin + kSize / 2
    << "\" text-anchor=\"middle\" transform=\"rotate(-90 " << kMargin / 3 << ' ' << kMargin + kSize / 2
    << ")\">Precision</text>\n";
  std::size_t c = 0;
  for (const auto& [threshold, curve] : r.sap) {
    s << "<polyline fill=\"none\" stroke=\"" << colors[c % 3] << "\" points=\"";
    for (const auto& p : curve.pr) {
      s << kMargin + p.recall * kSize << ',' << kMargin + (1.0 - p.precision) * kSize << ' ';
    }
    s << "\"/>\n";
    s << "<text x=\"" << kMargin + 10 << "\" y=\"" << kMargin + 20 + 18 * static_cast<double>(c) << "\" fill=\""
      << colors[c % 3] << "\">sAP" << threshold << " = " << format_number(100.0 * curve.ap) << "</text>\n";
    ++c;
  }
  s << "</svg>\n";
  return s.str();
}

void run_eval(const EvalArgs& a) {
  if (a.dataset_type != "pinhole" && a.dataset_type != "fisheye" && a.dataset_type != "spherical") {
    throw ValidationError("unknown dataset type '" + a.dataset_type + "'");
  }
  const auto preds = read_predictions(a.pred);
  const auto gt = read_dataset(a.gt);

  std::vector<std::string> missing, extra;
  std::map<std::string, bool> gt_names;
  for (const auto& [name, ann] : gt) {
    gt_names[name] = true;
    if (!preds.count(name)) missing.push_back(name);
  }
  for (const auto& [name, p] : preds) {
    if (!gt_names.count(name)) extra.push_back(name);
  }
  if (!missing.empty() || !extra.empty()) {
    std::ostringstream msg;
    msg << "image sets differ;";
    for (const auto& n : missing) msg << " missing prediction: " << n << ';';
    for (const auto& n : extra) msg << " no ground truth: " << n << ';';
    throw ValidationError(msg.str());
  }

  PredictionSet pset;
  GroundTruthSet gset;
  for (const auto& [name, ann] : gt) {
    pset.push_back(preds.at(name));
    ImageGroundTruth g{ann.image, {}, ann.junctions};
    for (const auto& l : ann.lines) g.lines.push_back(l.points);
    gset.push_back(std::move(g));
  }
  const EvalOptions opts{a.scale, a.dataset_type == "spherical"};
  const auto report = evaluate(pset, gset, opts);

  Json j;
  for (const auto& [t, curve] : report.sap) j["sap"][format_number(t)] = curve.ap;
  for (const auto& [t, ap] : report.junction_ap) j["junction_ap"][format_number(t)] = ap;
  j["msap"] = report.msap;
  j["map_j"] = report.map_j;
  j["images"] = gt.size();
  j["dataset_type"] = a.dataset_type;

  std::ostringstream csv;
  csv << "threshold,recall,precision\n";
  for (const auto& [t, curve] : report.sap) {
    for (const auto& p : curve.pr) {
      csv << format_number(t) << ',' << format_number(p.recall) << ',' << format_number(p.precision) << '\n';
    }
  }
  fs::create_directories(a.output);
  write_text_atomic(fs::path(a.output) / "report.json", dump(j));
  write_text_atomic(fs::path(a.output) / "pr.csv", csv.str());
  write_text_atomic(fs::path(a.output) / "pr.svg", pr_svg(report));
  std::cout << "msAP " << format_number(100.0 * report.msap) << "  mAPJ " << format_number(100.0 * report.map_j)
            << '\n';
}

// --- align ---------------------------------------------------------------------

struct AlignArgs {
  std::string features;
  std::string lines;
  std::string output;
  std::size_t n_points = kDefaultAlignPoints;
  std::size_t pool = kDefaultAlignPool;
};

void run_align(const AlignArgs& a) {
  const auto map = to_planes<float>(read_tensor(a.features));
  const auto ann = read_annotation(a.lines);
  AlignOptions opts;
  opts.n_points = a.n_points;
  opts.pool = a.pool;
  opts.scale_x = ann.image.width / static_cast<double>(map.width());
  opts.scale_y = ann.image.height / static_cast<double>(map.height());
  const std::size_t length = map.channels() * (a.n_points / std::max<std::size_t>(a.pool, 1));
  Tensor out{{ann.lines.size(), length}, {}};
  for (const auto& l : ann.lines) {
    for (double v : bezier_align(map, l.points, opts)) out.data.push_back(static_cast<float>(v));
  }
  write_tensor(a.output, out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bezier line segment toolkit"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Least-squares Bezier fit of a polyline (JSON [[x,y],...])");
  fit_cmd->add_option("-i,--input", fit.input, "Polyline JSON file, or - for stdin");
  fit_cmd->add_option("--order", fit.order)->check(CLI::Range(1, 6));
  fit_cmd->add_option("--params", fit.params, "uniform | chord");
  fit_cmd->add_flag("--pin-endpoints", fit.pin);
  fit_cmd->add_option("-o,--output", fit.output);

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("fit-sweep", "Fitting error vs. Bezier order on synthetic distorted lines");
  sweep_cmd->add_option("--segments", sweep.segments);
  sweep_cmd->add_option("--seed", sweep.seed);
  sweep_cmd->add_option("--samples", sweep.samples);
  sweep_cmd->add_option("--params", sweep.params);
  sweep_cmd->add_option("--camera", sweep.camera, "Fisheye camera JSON");
  sweep_cmd->add_option("-o,--output", sweep.output);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Distort a pinhole annotation set through a camera model");
  synth_cmd->add_option("-i,--input", synth.input)->required();
  synth_cmd->add_option("--camera", synth.camera)->required();
  synth_cmd->add_option("-o,--output", synth.output)->required();
  synth_cmd->add_option("--order", synth.order)->check(CLI::Range(1, 6));
  synth_cmd->add_option("--samples", synth.samples);
  synth_cmd->add_option("--params", synth.params);
  synth_cmd->add_flag("--pin-endpoints", synth.pin);
  synth_cmd->add_option("--noise", synth.noise, "Relative uniform noise on fisheye coefficients");
  synth_cmd->add_option("--seed", synth.seed);

  CodecArgs enc;
  auto* enc_cmd = app.add_subcommand("encode", "Annotations to packed grid-map tensors");
  enc_cmd->add_option("-i,--input", enc.input)->required();
  enc_cmd->add_option("-o,--output", enc.output)->required();
  enc_cmd->add_option("--grid", enc.grid, "WxH bins");
  enc_cmd->add_option("--order", enc.order)->check(CLI::Range(1, 6));
  enc_cmd->add_option("--dataset-type", enc.dataset_type);

  CodecArgs dec;
  auto* dec_cmd = app.add_subcommand("decode", "Packed grid-map tensors to a prediction file");
  dec_cmd->add_option("-i,--input", dec.input)->required();
  dec_cmd->add_option("-o,--output", dec.output)->required();
  dec_cmd->add_option("--top-k", dec.top_k);
  dec_cmd->add_option("--min-conf", dec.min_conf);
  dec_cmd->add_option("--nms", dec.nms_window, "NMS window (odd)");
  dec_cmd->add_option("--dataset-type", dec.dataset_type);

  MatchArgs match;
  auto* match_cmd = app.add_subcommand("match", "Snap line endpoints to junctions in a prediction file");
  match_cmd->add_option("-p,--pred", match.pred)->required();
  match_cmd->add_option("-o,--output", match.output)->required();
  match_cmd->add_option("--radius", match.radius);

  SampleArgs sample;
  auto* sample_cmd = app.add_subcommand("sample", "Label and sample proposals against ground truth");
  sample_cmd->add_option("-p,--pred", sample.pred)->required();
  sample_cmd->add_option("-g,--gt", sample.gt)->required();
  sample_cmd->add_option("-o,--output", sample.output);
  sample_cmd->add_option("--eta", sample.eta);
  sample_cmd->add_option("--n-pos", sample.n_pos);
  sample_cmd->add_option("--n-neg", sample.n_neg);
  sample_cmd->add_option("--n-gt", sample.n_gt);
  sample_cmd->add_option("--seed", sample.seed);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "sAP / msAP / junction mAP of a prediction file");
  eval_cmd->add_option("-p,--pred", ev.pred)->required();
  eval_cmd->add_option("-g,--gt", ev.gt)->required();
  eval_cmd->add_option("-o,--output", ev.output)->required();
  eval_cmd->add_option("--dataset-type", ev.dataset_type, "pinhole | fisheye | spherical");
  eval_cmd->add_option("--scale", ev.scale, "Longer image side used for distances");

  AlignArgs align;
  auto* align_cmd = app.add_subcommand("align", "BezierAlign line features from a feature tensor");
  align_cmd->add_option("-f,--features", align.features)->required();
  align_cmd->add_option("-l,--lines", align.lines)->required();
  align_cmd->add_option("-o,--output", align.output)->required();
  align_cmd->add_option("--np", align.n_points);
  align_cmd->add_option("--pool", align.pool);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*fit_cmd) run_fit(fit);
    if (*sweep_cmd) run_fit_sweep(sweep);
    if (*synth_cmd) run_synth(synth);
    if (*enc_cmd) run_encode(enc);
    if (*dec_cmd) run_decode(dec);
    if (*match_cmd) run_match(match);
    if (*sample_cmd) run_sample(sample);
    if (*eval_cmd) run_eval(ev);
    if (*align_cmd) run_align(align);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
