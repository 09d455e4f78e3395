// Command-line front end.
//
// Exit codes: 0 success, 1 other failure, 2 usage, 3 format error,
// 4 numeric divergence.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tractfilter/ablation.hpp"
#include "tractfilter/ensemble.hpp"
#include "tractfilter/io/checkpoint.hpp"
#include "tractfilter/io/config.hpp"
#include "tractfilter/io/formats.hpp"
#include "tractfilter/io/report.hpp"
#include "tractfilter/io/subject.hpp"
#include "tractfilter/io/synth.hpp"
#include "tractfilter/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tractfilter;

namespace {

constexpr std::uint64_t kSeedSplit = 11;
constexpr std::uint64_t kSeedSynth = 12;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string output_dir;

  io::RunConfig load() const {
    io::RunConfig c = config_path.empty() ? io::RunConfig{} : io::load_config(config_path);
    if (seed) c.seed = *seed;
    c.validate();
    return c;
  }
};

void add_common(CLI::App* cmd, Common& c, bool needs_output) {
  cmd->add_option("--config", c.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
  auto* out = cmd->add_option("--output-dir", c.output_dir, "directory for outputs");
  if (needs_output) out->required();
}

void write_manifest(const fs::path& dir, const std::string& command, const io::RunConfig& cfg, json extra = {}) {
  fs::create_directories(dir);
  json m = {{"command", command}, {"config_hash", io::config_hash(cfg)}, {"seed", cfg.seed}, {"config", cfg}};
  if (!extra.is_null()) m["inputs"] = std::move(extra);
  io::write_json(dir / "manifest.json", m);
}

void write_text(const fs::path& path, const std::string& s) { io::write_file(path.string(), {s.begin(), s.end()}); }

struct Dataset {
  fs::path root;
  std::vector<std::string> ids;
  std::vector<SubjectData> subjects;

  const SubjectData* find(const std::string& id) const {
    for (const auto& s : subjects)
      if (s.id == id) return &s;
    throw InvalidInput("subject '" + id + "' is not part of the dataset");
  }
  std::vector<const SubjectData*> pick(const std::vector<std::string>& ids_) const {
    std::vector<const SubjectData*> out;
    for (const auto& id : ids_) out.push_back(find(id));
    return out;
  }
  std::vector<const SubjectData*> all() const { return pick(ids); }
};

Dataset load_dataset(const fs::path& root, const io::RunConfig& cfg, const std::string& labels) {
  Dataset d;
  d.root = root;
  d.ids = io::read_dataset_subjects(root);
  for (const auto& id : d.ids)
    d.subjects.push_back(io::load_subject(root / id, cfg.descriptors.lmax, cfg.descriptors.shells, labels));
  return d;
}

std::vector<Split> make_splits(const std::vector<std::string>& ids, const io::RunConfig& cfg) {
  std::vector<Split> out;
  for (int r = 0; r < cfg.realizations; ++r)
    out.push_back(split_subjects(ids, cfg.split, derive_seed(cfg.seed, {kSeedSplit, static_cast<std::uint64_t>(r)})));
  return out;
}

json split_json(const Split& s) { return {{"train", s.train}, {"validation", s.validation}, {"test", s.test}}; }

Split split_from_json(const json& j) {
  return {j.at("train").get<std::vector<std::string>>(), j.at("validation").get<std::vector<std::string>>(),
          j.at("test").get<std::vector<std::string>>()};
}

Split choose_split(const Dataset& d, const io::RunConfig& cfg, const std::string& split_file, int realization) {
  if (!split_file.empty()) {
    const auto reals = io::read_json(split_file).at("realizations");
    if (realization < 0 || realization >= static_cast<int>(reals.size()))
      throw InvalidInput("split file has no realization " + std::to_string(realization));
    return split_from_json(reals.at(static_cast<std::size_t>(realization)));
  }
  io::RunConfig c = cfg;
  c.realizations = std::max(c.realizations, realization + 1);
  return make_splits(d.ids, c).at(static_cast<std::size_t>(realization));
}

DescriptorConfig descriptor_config(const io::RunConfig& cfg, std::vector<std::uint32_t> region_table) {
  DescriptorConfig d;
  d.n = cfg.descriptors.n;
  d.k = cfg.descriptors.k;
  d.step = cfg.descriptors.step;
  d.region_table = std::move(region_table);
  d.landmarks_on_full = cfg.descriptors.landmarks_on_full;
  d.standardize = cfg.descriptors.standardize;
  return d;
}

std::vector<std::uint32_t> region_table_for(const io::RunConfig& cfg, std::span<const SubjectData* const> subjects) {
  return cfg.descriptors.region_table.empty() ? derive_region_table(subjects) : cfg.descriptors.region_table;
}

TrainOptions train_options(const io::RunConfig& cfg) {
  TrainOptions t;
  t.adam = cfg.adam();
  t.epochs = cfg.training.epochs;
  t.train_samples = cfg.training.train_samples;
  t.val_samples = cfg.training.val_samples;
  t.batch_size = cfg.training.batch_size;
  t.substitute = cfg.ablation_selection();
  t.seed = cfg.seed;
  return t;
}

void print_epoch(const EpochRecord& e) {
  std::cout << "epoch " << e.epoch << "  loss";
  for (double l : e.train_loss) std::cout << ' ' << io::fmt(l);
  std::cout << "  val acc3 " << io::fmt(e.validation.accuracy_3) << " acc16 " << io::fmt(e.validation.accuracy_16)
            << std::endl;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Common& c, int subjects, int streamlines) {
  const auto cfg = c.load();
  synth::SynthOptions opt;
  opt.subjects = subjects;
  opt.streamlines = streamlines;
  const fs::path root = c.output_dir;
  std::vector<std::string> ids;
  for (int i = 0; i < subjects; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "subject_%02d", i);
    const auto s = synth::make_subject(id, derive_seed(cfg.seed, {kSeedSynth, static_cast<std::uint64_t>(i)}), opt);
    io::write_synth_subject(root / id, s, cfg.descriptors.lmax, cfg.descriptors.shells);
    ids.push_back(id);
    std::cout << id << ": " << s.streamlines.size() << " streamlines\n";
  }
  io::write_dataset_index(root, ids);
  write_manifest(root, "synth", cfg, {{"subjects", subjects}, {"streamlines", streamlines}});
  return 0;
}

int cmd_supervise(const Common& c, const std::string& subject) {
  const auto cfg = c.load();
  const fs::path dir = subject;
  const fs::path out = c.output_dir.empty() ? dir : fs::path(c.output_dir);
  const auto streamlines = io::read_tractogram((dir / "tractogram.strm").string());
  const auto in = io::load_supervisor_inputs(dir, cfg.supervisors.loop_threshold_deg, cfg.supervisors.ventricle_radius_mm);
  std::vector<SupervisorVerdict> labels;
  labels.reserve(streamlines.size());
  for (const auto& s : streamlines) labels.push_back(supervise(resample_fixed_step(s, 1.0).points(), in));
  fs::create_directories(out);
  io::write_label_csv((out / "labels.csv").string(), labels);

  json summary = {{"streamlines", labels.size()}, {"distribution", io::distribution_json(class_distribution(labels))}};
  if (fs::exists(dir / "truth.csv")) {
    const auto truth = io::import_labels((dir / "truth.csv").string(), static_cast<long>(labels.size()));
    json agree = json::object();
    for (int k = 0; k < kSupervisorCount; ++k) {
      std::size_t hit = 0;
      for (std::size_t i = 0; i < labels.size(); ++i) hit += labels[i][k] == truth[i][k];
      const double a = labels.empty() ? 1.0 : static_cast<double>(hit) / static_cast<double>(labels.size());
      agree[kSupervisorNames[static_cast<std::size_t>(k)]] = a;
      std::cout << kSupervisorNames[static_cast<std::size_t>(k)] << " agreement with truth: " << io::fmt(a) << "\n";
    }
    summary["truth_agreement"] = agree;
  }
  io::write_json(out / "supervise.json", summary);
  write_manifest(out, "supervise", cfg, {{"subject", subject}});
  std::cout << "wrote " << (out / "labels.csv").string() << "\n";
  return 0;
}

int cmd_ensemble(const Common& c, const std::string& labels_path) {
  const auto cfg = c.load();
  const auto labels = io::import_labels(labels_path);
  const auto dist = class_distribution(labels);
  std::cout << "code  class  borderline  count\n";
  for (int i = 0; i < CompositionClass::kCount; ++i) {
    const auto cls = CompositionClass::from_index(i);
    std::printf("%s  %-5s  %-10s  %llu\n", cls.code().c_str(), to_string(map_to_triclass(cls)),
                is_borderline(cls) ? "yes" : "no", static_cast<unsigned long long>(dist.composition[static_cast<std::size_t>(i)]));
  }
  for (int t = 0; t < kTriClassCount; ++t)
    std::printf("%-4s %llu\n", kTriClassNames[static_cast<std::size_t>(t)],
                static_cast<unsigned long long>(dist.triclass[static_cast<std::size_t>(t)]));
  if (!c.output_dir.empty()) {
    const fs::path out = c.output_dir;
    fs::create_directories(out);
    io::write_json(out / "ensemble.json", io::distribution_json(dist));
    write_manifest(out, "ensemble", cfg, {{"labels", labels_path}});
  }
  return 0;
}

int cmd_features(const Common& c, const std::string& subject) {
  const auto cfg = c.load();
  const fs::path dir = subject;
  SubjectData s;
  s.id = dir.filename().string();
  s.streamlines = io::read_tractogram((dir / "tractogram.strm").string());
  s.volumes.t1w = normalize_t1w(io::read_volume<float>((dir / "t1w.vol").string()));
  s.volumes.sh = io::load_sh(dir, cfg.descriptors.lmax, cfg.descriptors.shells);
  s.volumes.parcellation = io::read_volume<std::uint32_t>((dir / "wmparc.vol").string());
  const SubjectData* one[] = {&s};
  auto dcfg = descriptor_config(cfg, region_table_for(cfg, one));
  dcfg.bbox = s.bbox();
  std::vector<DescriptorSet> sets;
  sets.reserve(s.streamlines.size());
  for (const auto& st : s.streamlines) sets.push_back(build_descriptors(st, s.volumes, dcfg));
  const fs::path out = c.output_dir;
  fs::create_directories(out);
  io::write_file((out / "descriptors.dsc").string(), io::encode_descriptors(sets));
  write_manifest(out, "features", cfg, {{"subject", subject}, {"region_table", dcfg.region_table}});
  std::cout << "wrote " << sets.size() << " descriptor records\n";
  return 0;
}

int cmd_split(const Common& c, const std::string& dataset) {
  const auto cfg = c.load();
  const auto ids = io::read_dataset_subjects(dataset);
  json reals = json::array();
  for (const auto& s : make_splits(ids, cfg)) reals.push_back(split_json(s));
  const fs::path out = c.output_dir;
  fs::create_directories(out);
  io::write_json(out / "split.json", {{"realizations", reals}});
  write_manifest(out, "split", cfg, {{"dataset", dataset}});
  std::cout << reals.dump(2) << "\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& dataset, const std::string& split_file, int realization,
              const std::string& labels) {
  const auto cfg = c.load();
  const auto data = load_dataset(dataset, cfg, labels);
  const Split split = choose_split(data, cfg, split_file, realization);
  const auto all = data.all();
  const auto table = region_table_for(cfg, all);
  const auto dcfg = descriptor_config(cfg, table);
  const auto net_cfg = cfg.network_config(static_cast<int>(table.size()));
  const fs::path out = c.output_dir;
  fs::create_directories(out);
  std::string log;
  auto result = train(net_cfg, data.pick(split.train), data.pick(split.validation), dcfg, train_options(cfg),
                      [&](const EpochRecord& e) {
                        print_epoch(e);
                        log += io::epoch_json(e).dump() + "\n";
                        write_text(out / "train_log.jsonl", log);
                      });
  const json meta = {{"region_table", table},
                     {"substitute", selection_string(cfg.ablation_selection())},
                     {"descriptors", cfg.descriptors},
                     {"split", split_json(split)},
                     {"seed", cfg.seed}};
  io::write_checkpoint((out / "model.ckpt").string(), io::snapshot(result.net, meta));
  io::write_json(out / "validation.json", io::report_json(result.history.back().validation));
  write_manifest(out, "train", cfg, {{"dataset", dataset}, {"split", split_json(split)}, {"labels", labels}});
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& dataset, const std::string& checkpoint,
                 const std::string& subjects_csv, std::optional<int> samples, const std::string& labels) {
  const auto cfg = c.load();
  const auto ckpt = io::read_checkpoint(checkpoint);
  const auto meta = ckpt.metadata();
  nn::StarNetwork<float> net(ckpt.network_config());
  io::restore(ckpt, net);
  const auto data = load_dataset(dataset, cfg, labels);
  std::vector<std::string> ids;
  if (!subjects_csv.empty()) {
    std::stringstream ss(subjects_csv);
    for (std::string id; std::getline(ss, id, ',');)
      if (!id.empty()) ids.push_back(id);
  } else {
    ids = split_from_json(meta.at("split")).test;
  }
  const auto table = meta.at("region_table").get<std::vector<std::uint32_t>>();
  io::RunConfig used = cfg;
  used.descriptors = meta.at("descriptors").get<io::DescriptorOptions>();
  const auto substitute = parse_selection(meta.at("substitute").get<std::string>());
  const auto n = static_cast<std::size_t>(samples.value_or(cfg.training.test_samples));
  const auto ev = evaluate(net, data.pick(ids), descriptor_config(used, table), substitute, n,
                           derive_seed(cfg.seed, {kSeedTestDraw}), derive_seed(cfg.seed, {kSeedNoise, kSeedTestDraw}),
                           cfg.training.batch_size);
  const fs::path out = c.output_dir;
  fs::create_directories(out);
  io::write_json(out / "metrics.json", io::report_json(ev.report));
  write_manifest(out, "evaluate", cfg, {{"dataset", dataset}, {"checkpoint", checkpoint}, {"subjects", ids}, {"samples", n}});
  std::cout << io::report_table(ev.report);
  return 0;
}

int cmd_ablate(const Common& c, const std::string& dataset, const std::string& mode_name, const std::string& labels) {
  const auto cfg = c.load();
  const AblationMode mode = mode_name == "loo"      ? AblationMode::leave_one_out
                            : mode_name == "single" ? AblationMode::single_input
                                                    : AblationMode::both;
  const auto data = load_dataset(dataset, cfg, labels);
  const auto all = data.all();
  const auto table = region_table_for(cfg, all);
  std::vector<SubjectSplitView> views;
  for (const auto& s : make_splits(data.ids, cfg))
    views.push_back({data.pick(s.train), data.pick(s.validation), data.pick(s.test)});
  const auto configs = ablation_configurations(mode);
  const auto runs = run_ablation(views, cfg.network_config(static_cast<int>(table.size())), descriptor_config(cfg, table),
                                 train_options(cfg), configs, static_cast<std::size_t>(cfg.training.test_samples),
                                 [](const AblationRun& r) {
                                   std::cout << "realization " << r.realization << "  " << r.configuration.name
                                             << "  acc3 " << io::fmt(r.test.accuracy_3) << "  acc16 "
                                             << io::fmt(r.test.accuracy_16) << std::endl;
                                 });
  const fs::path out = c.output_dir;
  fs::create_directories(out);
  io::write_json(out / "ablation.json", io::ablation_json(runs));
  write_manifest(out, "ablate", cfg, {{"dataset", dataset}, {"mode", mode_name}, {"labels", labels}});
  return 0;
}

int cmd_report(const Common& c, const std::string& metrics_path) {
  const auto cfg = c.load();
  const auto j = io::read_json(metrics_path);
  const fs::path out = c.output_dir;
  fs::create_directories(out);
  std::string text;
  if (j.contains("runs")) {
    std::string csv = "configuration,accuracy_3_mean,accuracy_3_std,accuracy_16_mean,accuracy_16_std,"
                      "mean_branch_accuracy_mean,mean_branch_accuracy_std\n";
    text = "configuration        acc3 mean  acc3 std  acc16 mean  acc16 std\n";
    for (const auto& s : j.at("summary")) {
      auto num = [&](const char* k, const char* f) { return io::fmt(s.at(k).at(f).get<double>()); };
      char line[160];
      std::snprintf(line, sizeof line, "%-20s %-10s %-9s %-11s %s\n", s.at("configuration").get<std::string>().c_str(),
                    num("accuracy_3", "mean").c_str(), num("accuracy_3", "std").c_str(),
                    num("accuracy_16", "mean").c_str(), num("accuracy_16", "std").c_str());
      text += line;
      csv += s.at("configuration").get<std::string>() + "," + num("accuracy_3", "mean") + "," +
             num("accuracy_3", "std") + "," + num("accuracy_16", "mean") + "," + num("accuracy_16", "std") + "," +
             num("mean_branch_accuracy", "mean") + "," + num("mean_branch_accuracy", "std") + "\n";
    }
    write_text(out / "report.csv", csv);
  } else {
    const auto r = io::report_from_json(j);
    text = io::report_table(r);
    write_text(out / "report.csv", io::report_csv(r));
  }
  write_text(out / "report.txt", text);
  write_manifest(out, "report", cfg, {{"metrics", metrics_path}});
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streamline filtering toolkit"};
  app.require_subcommand(1);
  Common common;

  int synth_subjects = 7, synth_streamlines = 2000;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset with known labels");
  add_common(synth_cmd, common, true);
  synth_cmd->add_option("--subjects", synth_subjects, "number of subjects")->check(CLI::Range(1, 1000));
  synth_cmd->add_option("--streamlines", synth_streamlines, "streamlines per subject")->check(CLI::Range(1, 10000000));

  std::string subject;
  auto* sup_cmd = app.add_subcommand("supervise", "label a subject's streamlines with the four supervisors");
  add_common(sup_cmd, common, false);
  sup_cmd->add_option("--subject", subject, "subject directory")->required()->check(CLI::ExistingDirectory);

  std::string labels_path;
  auto* ens_cmd = app.add_subcommand("ensemble", "composition and three-class summary of a label file");
  add_common(ens_cmd, common, false);
  ens_cmd->add_option("--labels", labels_path, "label CSV")->required()->check(CLI::ExistingFile);

  auto* feat_cmd = app.add_subcommand("features", "dump the network descriptors of a subject");
  add_common(feat_cmd, common, true);
  feat_cmd->add_option("--subject", subject, "subject directory")->required()->check(CLI::ExistingDirectory);

  std::string dataset;
  auto* split_cmd = app.add_subcommand("split", "subject-level train/validation/test splits");
  add_common(split_cmd, common, true);
  split_cmd->add_option("--dataset", dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);

  std::string split_file, labels_name = "labels.csv";
  int realization = 0;
  auto* train_cmd = app.add_subcommand("train", "train the network");
  add_common(train_cmd, common, true);
  train_cmd->add_option("--dataset", dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--split", split_file, "split.json from `split`")->check(CLI::ExistingFile);
  train_cmd->add_option("--realization", realization, "split realization index")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--labels", labels_name, "label file name inside each subject directory");

  std::string checkpoint, subjects_csv;
  std::optional<int> samples;
  auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on held-out subjects");
  add_common(eval_cmd, common, true);
  eval_cmd->add_option("--dataset", dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--checkpoint", checkpoint, "model.ckpt")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--subjects", subjects_csv, "comma-separated subject ids (default: the checkpoint's test set)");
  eval_cmd->add_option("--samples", samples, "number of evaluation draws")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--labels", labels_name, "label file name inside each subject directory");

  std::string mode = "both";
  auto* abl_cmd = app.add_subcommand("ablate", "retrain with inputs replaced by noise");
  add_common(abl_cmd, common, true);
  abl_cmd->add_option("--dataset", dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
  abl_cmd->add_option("--mode", mode, "loo, single or both")->check(CLI::IsMember({"loo", "single", "both"}));
  abl_cmd->add_option("--labels", labels_name, "label file name inside each subject directory");

  std::string metrics_path;
  auto* rep_cmd = app.add_subcommand("report", "tables and CSV from metrics.json or ablation.json");
  add_common(rep_cmd, common, true);
  rep_cmd->add_option("--metrics", metrics_path, "metrics or ablation JSON")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(common, synth_subjects, synth_streamlines);
    if (sup_cmd->parsed()) return cmd_supervise(common, subject);
    if (ens_cmd->parsed()) return cmd_ensemble(common, labels_path);
    if (feat_cmd->parsed()) return cmd_features(common, subject);
    if (split_cmd->parsed()) return cmd_split(common, dataset);
    if (train_cmd->parsed()) return cmd_train(common, dataset, split_file, realization, labels_name);
    if (eval_cmd->parsed()) return cmd_evaluate(common, dataset, checkpoint, subjects_csv, samples, labels_name);
    if (abl_cmd->parsed()) return cmd_ablate(common, dataset, mode, labels_name);
    if (rep_cmd->parsed()) return cmd_report(common, metrics_path);
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 3;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 4;
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
