#include "moemo/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>

#include "moemo/ablation.hpp"
#include "moemo/config.hpp"
#include "moemo/errors.hpp"
#include "moemo/formats.hpp"
#include "moemo/manifest.hpp"
#include "moemo/run_record.hpp"
#include "moemo/synth.hpp"
#include "moemo/train.hpp"

namespace fs = std::filesystem;

namespace moemo {

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> settings;
};

RunConfig resolve_config(const GlobalOptions& g, RunConfig base) {
  if (!g.config_path.empty()) apply_config_file(base, g.config_path);
  if (g.seed) set_seed(base, *g.seed);
  for (const auto& s : g.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + s + "'");
    apply_setting(base, s.substr(0, eq), s.substr(eq + 1));
  }
  base.validate();
  return base;
}

fs::path out_dir(const GlobalOptions& g, const char* fallback) {
  fs::path dir = g.out_dir.empty() ? fs::path(fallback) : fs::path(g.out_dir);
  fs::create_directories(dir);
  return dir;
}

std::string loss_curve_csv(const std::vector<double>& curve) {
  std::string s = "epoch,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, curve[i]);
    s += buf;
  }
  return s;
}

/// Manifest split tags when present, otherwise a stratified split of the labels.
SplitIndices split_of(const LoadedData& data, const RunConfig& cfg) {
  SplitIndices split;
  const bool tagged = std::any_of(data.splits.begin(), data.splits.end(), [](const auto& s) { return !s.empty(); });
  if (!tagged) return stratified_split(labels_of(data.examples), cfg.train.split_fraction, cfg.train.seed);
  for (std::size_t i = 0; i < data.splits.size(); ++i) {
    if (data.splits[i] == "train") split.train.push_back(i);
    if (data.splits[i] == "test") split.test.push_back(i);
  }
  if (split.train.empty()) throw ValidationError("manifest has no clips tagged \"train\"");
  return split;
}

std::string input_hash(const fs::path& manifest_path) {
  const Manifest m = read_manifest(manifest_path);
  std::vector<fs::path> files{manifest_path.filename()};
  for (const auto& e : m.clips) {
    files.emplace_back(e.keypoint_file);
    files.emplace_back(e.context_file);
  }
  return content_hash(files, manifest_path.parent_path());
}

int cmd_synth(const GlobalOptions& g, std::ostream& out) {
  const RunConfig cfg = resolve_config(g, RunConfig{});
  const fs::path dir = out_dir(g, "synth");
  fs::create_directories(dir / "clips");
  Manifest m;
  m.dataset = "synthetic";
  std::vector<int> labels;
  for (std::size_t i = 0; i < cfg.synth.n_clips; ++i) labels.push_back(synth_cell(cfg.synth, i).label);
  const SplitIndices split = stratified_split(labels, cfg.train.split_fraction, cfg.train.seed);
  std::vector<std::string> tags(labels.size(), "train");
  for (auto i : split.test) tags[i] = "test";
  for (std::size_t i = 0; i < cfg.synth.n_clips; ++i) {
    const SynthClip clip = generate_clip(cfg.synth, i);
    const std::string kp = "clips/" + clip.keypoints.clip_id + ".mokp";
    const std::string cx = "clips/" + clip.keypoints.clip_id + ".mocx";
    write_keypoints(dir / kp, clip.keypoints);
    write_context(dir / cx, clip.context);
    m.clips.push_back(ManifestEntry{clip.keypoints.clip_id, kp, cx, clip.cell.label, tags[i]});
  }
  write_manifest(dir / "manifest.json", m);
  out << "wrote " << m.clips.size() << " clips to " << (dir / "manifest.json").string() << "\n";
  return kExitOk;
}

int cmd_vectors(const GlobalOptions& g, const std::vector<std::string>& files, std::ostream& out) {
  const RunConfig cfg = resolve_config(g, RunConfig{});
  std::optional<fs::path> dir;
  if (!g.out_dir.empty()) dir = out_dir(g, "");
  for (const auto& f : files) {
    const KeypointClip clip = resample(read_keypoints(f), cfg.pipeline.target_hz, cfg.pipeline.max_frames);
    for (const auto& [pid, track] : split_persons(clip)) {
      const PersonTrack t = cfg.pipeline.root_center ? root_centered(track) : track;
      const MovementVectorSeq seq = movement_vectors(t);
      out << clip.clip_id << " person " << pid << " " << shape_string(seq.shape()) << "\n";
      if (dir) {
        write_file_atomic(*dir / (clip.clip_id + "_p" + std::to_string(pid) + ".momv"),
                          encode_movement_vectors(clip.clip_id, seq));
      }
    }
  }
  return kExitOk;
}

int cmd_train(const GlobalOptions& g, const std::string& manifest, std::ostream& out) {
  const RunConfig cfg = resolve_config(g, RunConfig{});
  const fs::path dir = out_dir(g, "run");
  const LoadedData data = load_dataset(manifest, cfg);
  const SplitIndices split = split_of(data, cfg);
  const Dataset train_set = subset(data.examples, split.train);
  const Dataset test_set = subset(data.examples, split.test.empty() ? split.train : split.test);
  const MoEmoNet model(cfg.model);
  const TrainResult result = train(model, train_set, cfg.train, [&](std::size_t epoch, double loss) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "epoch %zu loss %.6f\n", epoch, loss);
    out << buf << std::flush;
  });
  const EvalReport report = evaluate(model, result.params, test_set, cfg.train.f1_average);
  write_checkpoint(dir / "checkpoint.moem", cfg.model, result.params);
  write_file_atomic(dir / "loss_curve.csv", loss_curve_csv(result.loss_curve));
  write_file_atomic(dir / "metrics.csv", report_csv(report));
  write_file_atomic(dir / "report.txt", format_report(report));
  write_file_atomic(dir / "config.txt", config_text(cfg));
  const RunRecord rec = make_run_record(cfg, input_hash(manifest), report, (dir / "checkpoint.moem").string());
  write_file_atomic(dir / "run.json", encode_run_record(rec));
  out << format_report(report);
  return kExitOk;
}

int cmd_eval(const GlobalOptions& g, const std::string& manifest, const std::string& checkpoint, bool all,
             std::ostream& out) {
  const Checkpoint ck = read_checkpoint(checkpoint);
  RunConfig base;
  base.model = ck.config;
  RunConfig cfg = resolve_config(g, base);
  if (!(cfg.model == ck.config)) throw ConfigError("model settings cannot override the checkpoint's configuration");
  const LoadedData data = load_dataset(manifest, cfg);
  Dataset test_set = data.examples;
  if (!all) {
    const SplitIndices split = split_of(data, cfg);
    if (!split.test.empty()) test_set = subset(data.examples, split.test);
  }
  const MoEmoNet model(ck.config);
  const EvalReport report = evaluate(model, ck.params, test_set, cfg.train.f1_average);
  out << format_report(report);
  if (!g.out_dir.empty()) {
    const fs::path dir = out_dir(g, "");
    write_file_atomic(dir / "metrics.csv", report_csv(report));
    write_file_atomic(dir / "report.txt", format_report(report));
  }
  return kExitOk;
}

int cmd_ablate(const GlobalOptions& g, const std::string& manifest, std::size_t n_seeds, bool quiet,
               std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve_config(g, ablation_preset());
  const fs::path dir = out_dir(g, "ablation");
  Dataset data;
  if (manifest.empty()) {
    data = to_dataset(generate(cfg.synth));
  } else {
    data = load_dataset(manifest, cfg).examples;
  }
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < n_seeds; ++i) seeds.push_back(cfg.train.seed + i);
  AblationProgress progress;
  if (!quiet) {
    progress = [&](Variant v, std::uint64_t seed, std::size_t epoch, double loss) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%s seed %llu epoch %zu loss %.4f\n", std::string(variant_name(v)).c_str(),
                    static_cast<unsigned long long>(seed), epoch, loss);
      err << buf << std::flush;
    };
  }
  const AblationResult result = run_ablation(data, cfg, seeds, progress);
  write_file_atomic(dir / "ablation.csv", ablation_csv(result));
  write_file_atomic(dir / "ablation.txt", format_ablation(result));
  out << format_ablation(result);
  return kExitOk;
}

/// Problems found in one file; empty when it is valid.
std::vector<std::string> validate_path(const fs::path& path, const RunConfig& cfg) {
  if (path.extension() == ".json") return validate_manifest(path, cfg);
  try {
    const std::string bytes = read_file(path);
    const std::string_view magic = std::string_view(bytes).substr(0, 4);
    if (magic == "MOKP") {
      decode_keypoints(bytes);
    } else if (magic == "MOCX") {
      validate_context(decode_context(bytes), cfg.model.context_rows, cfg.model.context_cols);
    } else if (magic == "MOMV") {
      decode_movement_vectors(bytes);
    } else if (magic == "MOEM") {
      const Checkpoint ck = decode_checkpoint(bytes);
      const ParameterStore expected = MoEmoNet(ck.config).init_parameters(0);
      if (expected.names() != ck.params.names()) return {"parameter names do not match the stored configuration"};
      for (const auto& p : expected) {
        if (p.value.shape() != ck.params.at(p.name).value.shape()) {
          return {"parameter '" + p.name + "' has shape " + shape_string(ck.params.at(p.name).value.shape()) +
                  ", expected " + shape_string(p.value.shape())};
        }
      }
    } else {
      return {"unrecognized file type"};
    }
  } catch (const Error& e) {
    return {e.what()};
  }
  return {};
}

int cmd_validate(const GlobalOptions& g, const std::vector<std::string>& paths, std::ostream& out,
                 std::ostream& err) {
  const RunConfig cfg = resolve_config(g, RunConfig{});
  int status = kExitOk;
  for (const auto& p : paths) {
    const auto problems = validate_path(p, cfg);
    if (problems.empty()) {
      out << p << ": ok\n";
      continue;
    }
    status = kExitInvalid;
    for (const auto& msg : problems) err << p << ": " << msg << "\n";
  }
  return status;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Emotion detection from movement vectors and scene context", "moemo"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "seed for training and synthetic data");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--set", g.settings, "override one configuration key (KEY=VALUE)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  auto* vectors = app.add_subcommand("vectors", "compute movement vectors of keypoint files");
  std::vector<std::string> vector_files;
  vectors->add_option("files", vector_files, "keypoint files")->required();

  auto* train_cmd = app.add_subcommand("train", "train a model on a manifest");
  std::string manifest;
  train_cmd->add_option("manifest", manifest, "dataset manifest")->required();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_manifest, checkpoint;
  bool eval_all = false;
  eval_cmd->add_option("manifest", eval_manifest, "dataset manifest")->required();
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval_cmd->add_flag("--all", eval_all, "evaluate every labelled clip, not only the test split");

  auto* ablate = app.add_subcommand("ablate", "compare fusion variants");
  std::string ablate_manifest;
  std::size_t n_seeds = 3;
  bool quiet = false;
  ablate->add_option("manifest", ablate_manifest, "dataset manifest (synthetic data when omitted)");
  ablate->add_option("--seeds", n_seeds, "number of seeds, counting up from --seed")->check(CLI::PositiveNumber);
  ablate->add_flag("--quiet", quiet, "no per-epoch progress");

  auto* validate = app.add_subcommand("validate", "check interchange, manifest and checkpoint files");
  std::vector<std::string> validate_paths;
  validate->add_option("paths", validate_paths, "files to check")->required();

  for (auto* sub : {synth, vectors, train_cmd, eval_cmd, ablate, validate}) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(g, out);
    if (*vectors) return cmd_vectors(g, vector_files, out);
    if (*train_cmd) return cmd_train(g, manifest, out);
    if (*eval_cmd) return cmd_eval(g, eval_manifest, checkpoint, eval_all, out);
    if (*ablate) return cmd_ablate(g, ablate_manifest, n_seeds, quiet, out, err);
    if (*validate) return cmd_validate(g, validate_paths, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitUsage;
}

}  // namespace moemo
