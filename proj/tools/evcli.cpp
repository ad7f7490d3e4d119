// evcli: command-line front end for EV data valuation and the benchmark
// protocols.
//
//   evcli synth     --out DIR [--n-id N --n-val N --n-ood N --d D --classes C --shift S]
//   evcli value     --train FILE [--val FILE] --valuer NAME [--w W] --out DIR
//   evcli remove    --train FILE --val FILE --ood FILE [--fraction F] --out DIR
//   evcli add       --initial FILE --pool FILE --ood FILE [--steps 100,300,500] --out DIR
//   evcli stability --source FILE [--compare knn-shapley:0.5,random] --out DIR
//   evcli timing    (--train FILE | --n N --d D) --out DIR
//   evcli pca-gap   --train FILE [--val FILE] [--top-fraction F] --out DIR
//
// Exit codes: 0 success, 1 usage or other failure, 2 I/O or parse failure,
// 3 singular covariance without --ridge.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "evalue/evalue.hpp"

namespace fs = std::filesystem;
using evalue::Error;
using evalue::ErrorCode;
using evalue::benchlab::Json;

namespace {

struct Common {
  std::string out;
  std::int64_t seed = 0;
  std::size_t num_seeds = 1;
  bool ridge = false;
  int epochs = 30;
  double lr = 0.01;
  std::size_t num_models = 800;
  std::size_t k = 1000;
  int oob_epochs = 10;
  int threads = 0;
  std::string valuer = "knn-shapley";
  double w = 0.0;
};

// Files written by the current run; removed again if the run fails.
class OutputGuard {
 public:
  void open_dir(const fs::path& dir) {
    if (!fs::exists(dir)) {
      fs::create_directories(dir);
      created_dir_ = dir;
    }
  }
  void track(const fs::path& p) { files_.push_back(p); }
  void rollback() {
    std::error_code ec;
    for (const auto& f : files_) fs::remove(f, ec);
    if (!created_dir_.empty() && fs::is_empty(created_dir_, ec)) fs::remove(created_dir_, ec);
  }

 private:
  std::vector<fs::path> files_;
  fs::path created_dir_;
};

OutputGuard guard;

void write_text(const fs::path& path, const std::string& text) {
  guard.track(path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

void add_common(CLI::App* sub, Common& c, bool valuer_flags) {
  sub->add_option("--out", c.out, "Output directory (created if absent)")->required();
  sub->add_option("--seed", c.seed, "First seed");
  sub->add_option("--num-seeds", c.num_seeds, "Number of consecutive seeds")
      ->check(CLI::PositiveNumber);
  sub->add_flag("--ridge", c.ridge, "Add 1e-8*trace/d to the covariance diagonal");
  sub->add_option("--epochs", c.epochs, "Classifier epochs")->check(CLI::NonNegativeNumber);
  sub->add_option("--lr", c.lr, "Classifier learning rate")->check(CLI::PositiveNumber);
  sub->add_option("--num-models", c.num_models, "Data-OOB bootstrap models")
      ->check(CLI::PositiveNumber);
  sub->add_option("--oob-epochs", c.oob_epochs, "Epochs per Data-OOB model")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--k", c.k, "KNN-Shapley neighborhood size (clamped to n)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--threads", c.threads, "Worker thread cap (default: EV_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  if (valuer_flags) {
    sub->add_option("--valuer", c.valuer, "random | knn-shapley | data-oob | ev | index")
        ->check(CLI::IsMember({"random", "knn-shapley", "data-oob", "ev", "index"}));
    sub->add_option("--w", c.w, "EV combination weight")->check(CLI::Range(0.0, 1.0));
  }
}

evalue::benchlab::ProtocolConfig protocol_from(const Common& c) {
  evalue::benchlab::ProtocolConfig cfg;
  cfg.valuer = c.valuer;
  cfg.weight_w = c.w;
  cfg.seeds.clear();
  for (std::size_t i = 0; i < c.num_seeds; ++i) cfg.seeds.push_back(c.seed + static_cast<std::int64_t>(i));
  cfg.classifier = {c.epochs, c.lr};
  cfg.knn_k = c.k;
  cfg.num_models = c.num_models;
  cfg.oob_epochs = c.oob_epochs;
  cfg.ridge = c.ridge;
  return cfg;
}

// Config echo: the argument vector plus every resolved option value.
Json config_echo(const CLI::App* sub, int argc, char** argv) {
  Json j;
  j["command"] = sub->get_name();
  j["argv"] = std::vector<std::string>(argv, argv + argc);
  Json options = Json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    if (opt->get_expected_max() == 0) {
      options[name] = opt->count() > 0;
    } else if (opt->count() > 0) {
      options[name] = opt->as<std::string>();
    } else {
      options[name] = opt->get_default_str();
    }
  }
  j["options"] = options;
  j["threads"] = evalue::max_threads();
  return j;
}

void begin_outputs(const Common& c, const Json& echo) {
  guard.open_dir(c.out);
  write_text(fs::path(c.out) / "config.json", echo.dump(2) + "\n");
}

void finish_report(const Common& c, const evalue::benchlab::ExperimentReport& report) {
  const fs::path dir(c.out);
  guard.track(dir / "report.json");
  guard.track(dir / "report.csv");
  report.write(dir / "report.json", dir / "report.csv");
  std::cout << report.summary_line() << "\n";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo:
    case ErrorCode::kParse:
    case ErrorCode::kBadMagic:
    case ErrorCode::kUnsupportedVersion:
    case ErrorCode::kTruncatedFile:
    case ErrorCode::kLabelOutOfRange:
    case ErrorCode::kRaggedRows:
      return 2;
    case ErrorCode::kSingularCovariance:
      return 3;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EV data valuation and benchmark protocols"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  Common c;

  // synth
  evalue::datahub::ShiftSpec spec;
  std::size_t n_val = 0;
  std::string format = "evds";
  auto* synth = app.add_subcommand("synth", "Generate a matching-marginal covariate-shift pair");
  add_common(synth, c, false);
  synth->add_option("--n-id", spec.n_id, "In-distribution points (train + val)");
  synth->add_option("--n-val", n_val, "In-distribution points split off as val");
  synth->add_option("--n-ood", spec.n_ood, "Out-of-distribution points");
  synth->add_option("--d", spec.d, "Dimension");
  synth->add_option("--classes", spec.num_classes, "Number of classes");
  synth->add_option("--shift", spec.shift_strength, "Off-diagonal shift strength s")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--format", format, "evds | csv")->check(CLI::IsMember({"evds", "csv"}));

  // value
  std::string train_path, val_path, ood_path, initial_path, pool_path, source_path;
  auto* value = app.add_subcommand("value", "Score every training point");
  add_common(value, c, true);
  value->add_option("--train", train_path, "Training set (EVDS or CSV)")->required();
  value->add_option("--val", val_path, "Validation set (needed by knn-shapley)");

  // remove
  double fraction = 0.5;
  auto* remove = app.add_subcommand("remove", "Removal protocol: drop the top-valued points");
  add_common(remove, c, true);
  remove->add_option("--train", train_path)->required();
  remove->add_option("--val", val_path)->required();
  remove->add_option("--ood", ood_path)->required();
  remove->add_option("--fraction", fraction, "Fraction of points removed")
      ->check(CLI::Range(0.0, 1.0));

  // add
  std::vector<std::size_t> steps{100, 300, 500};
  auto* add = app.add_subcommand("add", "Addition protocol: grow the initial set by value");
  add_common(add, c, true);
  add->add_option("--initial", initial_path)->required();
  add->add_option("--pool", pool_path)->required();
  add->add_option("--ood", ood_path)->required();
  add->add_option("--steps", steps, "Pool prefix sizes to train at")->delimiter(',');

  // stability
  std::vector<std::string> compare;
  evalue::benchlab::StabilityConfig stab;
  auto* stability = app.add_subcommand("stability", "Rank stability under small replacements");
  add_common(stability, c, true);
  stability->add_option("--source", source_path)->required();
  stability->add_option("--compare", compare, "Valuers to compare, NAME or NAME:W")
      ->delimiter(',');
  stability->add_option("--pool", stab.pool);
  stability->add_option("--fixed", stab.fixed);
  stability->add_option("--repeats", stab.repeats);

  // timing
  std::size_t timing_n = 2000, timing_d = 64;
  evalue::benchlab::TimingConfig timing;
  bool no_exact = false;
  auto* timing_cmd = app.add_subcommand("timing", "Wall-clock of EV and baseline valuers");
  add_common(timing_cmd, c, false);
  timing_cmd->add_option("--train", train_path, "Dataset to time on (default: synthetic)");
  timing_cmd->add_option("--n", timing_n, "Synthetic size when --train is absent");
  timing_cmd->add_option("--d", timing_d, "Synthetic dimension when --train is absent");
  timing_cmd->add_option("--warmup", timing.warmup)->check(CLI::NonNegativeNumber);
  timing_cmd->add_option("--measured", timing.measured)->check(CLI::PositiveNumber);
  timing_cmd->add_option("--baselines", timing.baselines)->delimiter(',');
  timing_cmd->add_flag("--no-exact", no_exact, "Skip the exact leave-one-out path");

  // pca-gap
  double top_fraction = 0.25;
  auto* pca = app.add_subcommand("pca-gap", "Top-3 PCA variance of top vs bottom valued points");
  add_common(pca, c, true);
  pca->add_option("--train", train_path)->required();
  pca->add_option("--val", val_path);
  pca->add_option("--top-fraction", top_fraction)->check(CLI::Range(0.0, 0.5));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (c.threads > 0) evalue::set_max_threads(c.threads);
  CLI::App* sub = app.get_subcommands().front();

  namespace bl = evalue::benchlab;
  namespace dh = evalue::datahub;
  try {
    auto cfg = protocol_from(c);
    const Json echo = config_echo(sub, argc, argv);

    if (sub == synth) {
      if (n_val >= spec.n_id) throw Error(ErrorCode::kInvalidArgument, "--n-val must be < --n-id");
      spec.seed = static_cast<std::uint64_t>(c.seed);
      begin_outputs(c, echo);
      const auto pair = dh::synth_shift_pair(spec);
      const std::string ext = format == "csv" ? ".csv" : ".evds";
      const auto fmt = format == "csv" ? dh::Format::kCsv : dh::Format::kEvds;
      const fs::path dir(c.out);
      std::vector<std::size_t> train_idx(spec.n_id - n_val), val_idx(n_val);
      std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
      std::iota(val_idx.begin(), val_idx.end(), spec.n_id - n_val);
      auto save = [&](const dh::EmbeddingDataset& data, const std::string& stem) {
        guard.track(dir / (stem + ext));
        dh::save(data, dir / (stem + ext), fmt);
      };
      save(dh::subset(pair.id_set, train_idx), "train");
      if (n_val > 0) save(dh::subset(pair.id_set, val_idx), "val");
      save(pair.ood_set, "ood");

      bl::ExperimentReport report;
      report.protocol = "synth";
      report.generator = dh::kGeneratorIdentity;
      report.config = {{"n_id", spec.n_id}, {"n_val", n_val},   {"n_ood", spec.n_ood},
                       {"d", spec.d},       {"classes", spec.num_classes},
                       {"shift", spec.shift_strength},          {"seed", spec.seed}};
      bl::SeedEntry entry;
      entry.seed = c.seed;
      double max_diag_gap = 0.0;
      for (std::size_t i = 0; i < spec.d; ++i) {
        max_diag_gap = std::max(max_diag_gap, std::abs(pair.sigma_ood(i, i) - pair.sigma_id(i, i)));
      }
      entry.metrics["shift_retained"] = pair.shift_retained;
      entry.metrics["clip_rounds"] = static_cast<double>(pair.clip_rounds);
      entry.metrics["max_diagonal_gap"] = max_diag_gap;
      entry.metrics["lambda_min_ood"] = evalue::specmath::eigenvalues(pair.sigma_ood).back();
      for (const auto& [name, v] : entry.metrics) entry.rows.push_back({0, name, v});
      report.per_seed.push_back(std::move(entry));
      report.notes["normalization"] = "row L2 then column centering, per domain";
      report.notes["files"] = {"train" + ext, n_val > 0 ? "val" + ext : "", "ood" + ext};
      report.finalize();
      finish_report(c, report);
    } else if (sub == value) {
      const auto train = dh::load(train_path);
      std::optional<dh::EmbeddingDataset> val;
      if (!val_path.empty()) val = dh::load(val_path);
      begin_outputs(c, echo);
      bl::ValuationNotes notes;
      const auto values = bl::compute_values(train, val ? &*val : nullptr, cfg.primary(), cfg,
                                             c.seed, &notes);
      values.validate(train.size());
      std::string csv = "index,score,method,w\n";
      char buf[64];
      for (std::size_t i = 0; i < values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", values.scores[i]);
        csv += std::to_string(i) + "," + buf + "," + values.method + ",";
        std::snprintf(buf, sizeof buf, "%.17g", values.weight_w);
        csv += std::string(buf) + "\n";
      }
      write_text(fs::path(c.out) / "values.csv", csv);
      Json info = {{"method", values.method},
                   {"weight_w", values.weight_w},
                   {"n", values.size()},
                   {"ridge_applied", notes.ridge_applied},
                   {"degenerate_spectrum", notes.degenerate_spectrum},
                   {"never_out_of_bag", notes.never_out_of_bag}};
      write_text(fs::path(c.out) / "values.json", info.dump(2) + "\n");
      std::cout << values.method << " n=" << values.size() << " w=" << values.weight_w << "\n";
    } else if (sub == remove) {
      const auto train = dh::load(train_path);
      const auto val = dh::load(val_path);
      const auto ood = dh::load(ood_path);
      cfg.removal_fraction = fraction;
      begin_outputs(c, echo);
      finish_report(c, bl::run_removal(train, val, ood, cfg));
    } else if (sub == add) {
      const auto initial = dh::load(initial_path);
      const auto pool = dh::load(pool_path);
      const auto ood = dh::load(ood_path);
      cfg.addition_steps = steps;
      begin_outputs(c, echo);
      finish_report(c, bl::run_addition(initial, pool, ood, cfg));
    } else if (sub == stability) {
      const auto source = dh::load(source_path);
      cfg.stability = stab;
      for (const auto& item : compare) {
        const auto colon = item.find(':');
        bl::ValuerChoice choice{item.substr(0, colon), 0.0};
        if (colon != std::string::npos) choice.weight_w = std::stod(item.substr(colon + 1));
        cfg.comparison.push_back(choice);
      }
      begin_outputs(c, echo);
      finish_report(c, bl::run_stability(source, cfg));
    } else if (sub == timing_cmd) {
      dh::EmbeddingDataset train;
      if (!train_path.empty()) {
        train = dh::load(train_path);
      } else {
        dh::ShiftSpec ts;
        ts.n_id = timing_n;
        ts.n_ood = 2;
        ts.d = timing_d;
        ts.shift_strength = 0.0;
        ts.seed = static_cast<std::uint64_t>(c.seed);
        train = dh::synth_shift_pair(ts).id_set;
      }
      timing.include_exact = !no_exact;
      begin_outputs(c, echo);
      finish_report(c, bl::run_timing(train, cfg, timing));
    } else if (sub == pca) {
      const auto train = dh::load(train_path);
      std::optional<dh::EmbeddingDataset> val;
      if (!val_path.empty()) val = dh::load(val_path);
      begin_outputs(c, echo);
      finish_report(c, bl::run_pca_gap(train, val ? &*val : nullptr, cfg, top_fraction));
    }
  } catch (const Error& e) {
    guard.rollback();
    std::cerr << "evcli " << sub->get_name() << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    guard.rollback();
    std::cerr << "evcli " << sub->get_name() << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
