// talkcond: synth | train | evaluate | sweep | report

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "run_config.hpp"
#include "talkcond/error.hpp"
#include "talkcond/kernels.hpp"
#include "talkcond/parallel.hpp"
#include "talkcond/protocol.hpp"
#include "talkcond/report.hpp"
#include "talkcond/serialize.hpp"

namespace fs = std::filesystem;
using namespace talkcond;
using talkcond::cli::RunConfig;

namespace {

class OutputError : public Error {
 public:
  explicit OutputError(const std::string& what) : Error("output", what) {}
};

// Flag values; unset ones leave the config file / defaults alone.
struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> manifest, out, cache, kind, split_mode;
  std::optional<std::string> train_speakers, test_speakers, train_sentences, test_sentences;
  std::optional<std::size_t> states, mixtures, grouping, workers;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_iters;
  // synth
  std::optional<std::string> preset;
  std::optional<int> speakers, sentences, repetitions;
  std::optional<std::uint64_t> synth_seed;
  bool paper_shaped = false;
};

void add_config_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "INI configuration file");
  cmd->add_option("-o,--out", o.out, "Output directory");
}

void add_model_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-m,--manifest", o.manifest, "Corpus manifest (TSV)");
  cmd->add_option("--cache", o.cache, "Feature cache directory");
  cmd->add_option("--workers", o.workers, "Worker threads (default: hardware)");
  cmd->add_option("--split", o.split_mode, "paper | explicit");
  cmd->add_option("--train-speakers", o.train_speakers, "Comma list (explicit split)");
  cmd->add_option("--test-speakers", o.test_speakers, "Comma list (explicit split)");
  cmd->add_option("--train-sentences", o.train_sentences, "Comma list (explicit split)");
  cmd->add_option("--test-sentences", o.test_sentences, "Comma list (explicit split)");
}

void add_train_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-k,--kind", o.kind, "hmm | chmm2 | sphmm");
  cmd->add_option("--states", o.states, "States per model");
  cmd->add_option("--mixtures", o.mixtures, "Gaussian components per state");
  cmd->add_option("--grouping", o.grouping, "Acoustic states per suprasegmental state");
  cmd->add_option("--alpha", o.alpha, "Prosodic weight in [0, 1]");
  cmd->add_option("--seed", o.seed, "Training seed");
  cmd->add_option("--max-iters", o.max_iters, "EM iteration limit");
}

RunConfig resolve(const Overrides& o) {
  RunConfig cfg = cli::default_config();
  if (o.config) cfg = cli::load_config(*o.config, cfg);
  auto& p = cfg.protocol;
  if (o.manifest) cfg.manifest = *o.manifest;
  if (o.out) cfg.output_dir = *o.out;
  if (o.cache) p.cache_dir = *o.cache;
  if (o.kind) p.kind = parse_model_kind(*o.kind);
  if (o.split_mode) cfg.split.mode = *o.split_mode;
  if (o.train_speakers) cfg.split.train_speakers = cli::split_list(*o.train_speakers);
  if (o.test_speakers) cfg.split.test_speakers = cli::split_list(*o.test_speakers);
  const auto ints = [](const std::string& s) {
    std::vector<int> out;
    for (const auto& x : cli::split_list(s)) out.push_back(std::stoi(x));
    return out;
  };
  if (o.train_sentences) cfg.split.train_sentences = ints(*o.train_sentences);
  if (o.test_sentences) cfg.split.test_sentences = ints(*o.test_sentences);
  if (o.states) p.n_states = *o.states;
  if (o.mixtures) p.n_mix = *o.mixtures;
  if (o.grouping) p.sphmm.grouping = *o.grouping;
  if (o.workers) p.workers = *o.workers;
  if (o.alpha) p.sphmm.alpha = *o.alpha;
  if (o.seed) p.seed = *o.seed;
  if (o.max_iters) p.train.max_iters = *o.max_iters;
  if (o.preset) cfg.synth.preset = *o.preset;
  if (o.speakers) cfg.synth.speakers = *o.speakers;
  if (o.sentences) cfg.synth.sentences = *o.sentences;
  if (o.repetitions) cfg.synth.repetitions = *o.repetitions;
  if (o.synth_seed) cfg.synth.seed = *o.synth_seed;
  if (o.paper_shaped) cfg.synth.paper_shaped = true;
  if (p.workers == 0) p.workers = default_workers();
  cli::validate_config(cfg);
  return cfg;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw OutputError(what);
}

fs::path prepare_output(const RunConfig& cfg) {
  require(!cfg.output_dir.empty(), "no output directory (use --out or [output] dir)");
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec || !fs::is_directory(cfg.output_dir)) {
    throw OutputError("cannot create " + cfg.output_dir.string() +
                      (ec ? ": " + ec.message() : std::string()));
  }
  return cfg.output_dir;
}

void write(const fs::path& path, const std::string& text) { write_text_file(path, text); }

CorpusManifest manifest_for(const RunConfig& cfg) {
  if (cfg.manifest.empty()) throw CorpusError("no manifest (use --manifest or [corpus] manifest)");
  return load_manifest(cfg.manifest);
}

std::string train_log_jsonl(const std::vector<ConditionTrainLog>& log) {
  std::ostringstream os;
  for (const auto& c : log) {
    nlohmann::json j{{"record", "training"},
                     {"condition", c.label},
                     {"utterances", c.n_utterances},
                     {"log_likelihood", c.acoustic.log_likelihood},
                     {"converged", c.acoustic.converged}};
    if (!c.prosodic.log_likelihood.empty()) {
      j["prosodic_log_likelihood"] = c.prosodic.log_likelihood;
      j["prosodic_converged"] = c.prosodic.converged;
    }
    os << j.dump() << "\n";
  }
  return os.str();
}

void write_evaluation(const fs::path& dir, const Evaluation& ev) {
  write(dir / "performance.txt", format_performance_table(ev.report));
  write(dir / "confusion.txt", format_confusion_table(ev.confusion));
  write(dir / "report.jsonl", report_jsonl(ev.report, ev.confusion));
  // Re-read the columns so a broken matrix never leaves with exit code 0.
  for (std::size_t t = 0; t < ev.confusion.size(); ++t) {
    if (ev.confusion.column_total(t) == 0) continue;
    double sum = 0.0;
    for (std::size_t p = 0; p < ev.confusion.size(); ++p) sum += ev.confusion.percent(p, t);
    require(std::abs(sum - 100.0) <= 0.5, "confusion column does not sum to 100");
  }
}

void write_sweep(const fs::path& dir, const std::vector<SweepRow>& rows,
                 const std::vector<std::string>& labels) {
  write(dir / "sweep.txt", format_sweep_table(rows, labels));
  write(dir / "sweep.tsv", sweep_tsv(rows, false));
  write(dir / "sweep_excluding_neutral.tsv", sweep_tsv(rows, true));
  write(dir / "sweep.jsonl", sweep_jsonl(rows));
}

int cmd_synth(const Overrides& o) {
  const RunConfig cfg = resolve(o);
  const fs::path dir = prepare_output(cfg);
  const SyntheticSpec spec = cli::synthetic_spec(cfg.synth);
  const CorpusManifest m = generate_synthetic(spec, dir);
  write(dir / "config.ini", cli::config_to_ini(cfg));
  std::cout << "manifest " << (dir / "manifest.tsv").string() << "\n"
            << "utterances " << m.utterances.size() << " conditions " << m.condition_set.size()
            << " speakers " << spec.speakers << " sentences " << spec.sentences << " repetitions "
            << spec.repetitions << "\n";
  return 0;
}

int cmd_train(const Overrides& o) {
  const RunConfig cfg = resolve(o);
  const CorpusManifest m = manifest_for(cfg);
  const SplitSpec split = cli::resolve_split(cfg.split, m);
  const fs::path dir = prepare_output(cfg);
  const auto train = train_indices(m, split);
  const auto& p = cfg.protocol;
  const auto features = compute_features(m, train, p.mfcc, p.prosody, p.kind == ModelKind::kSphmm,
                                         p.workers, p.cache_dir);
  std::vector<ConditionTrainLog> log;
  const ModelBank bank = train_bank(m, train, features, p, &log);
  save_bank(dir / "bank.tcm", bank);
  write(dir / "train_log.jsonl", train_log_jsonl(log));
  write(dir / "config.ini", cli::config_to_ini(cfg));
  std::cout << "bank " << (dir / "bank.tcm").string() << " kind " << model_kind_name(bank.kind())
            << " models " << bank.size() << " train_utterances " << train.size() << "\n";
  return 0;
}

int cmd_evaluate(const Overrides& o, const std::string& bank_path,
                 const std::optional<std::string>& sweep) {
  const RunConfig cfg = resolve(o);
  const CorpusManifest m = manifest_for(cfg);
  const SplitSpec split = cli::resolve_split(cfg.split, m);
  const ModelBank bank = load_bank(bank_path);
  if (sweep && bank.kind() != ModelKind::kSphmm) {
    throw ModelError("--alpha-sweep needs an sphmm bank, got " + std::string(model_kind_name(bank.kind())));
  }
  const auto alphas = sweep ? parse_alpha_range(*sweep) : std::vector<double>{};
  const fs::path dir = prepare_output(cfg);
  const auto test = test_indices(m, split);
  if (test.empty()) throw CorpusError("split selects no test utterances");
  const auto& p = cfg.protocol;
  // Features follow the bank's configuration, not the run config.
  const auto features = compute_features(m, test, bank.mfcc, bank.prosody,
                                         bank.kind() == ModelKind::kSphmm, p.workers, p.cache_dir);
  const Evaluation ev = evaluate_bank(bank, m, test, features, p.workers);
  write_evaluation(dir, ev);
  if (sweep) write_sweep(dir, alpha_sweep(bank, m, test, features, alphas, p.workers), bank.condition_set.labels);
  write(dir / "config.ini", cli::config_to_ini(cfg));
  std::cout << format_performance_table(ev.report) << "\n" << format_confusion_table(ev.confusion);
  return 0;
}

int cmd_sweep(const Overrides& o, const std::string& range) {
  RunConfig cfg = resolve(o);
  cfg.protocol.kind = ModelKind::kSphmm;
  cli::validate_config(cfg);
  const auto alphas = parse_alpha_range(range);
  const CorpusManifest m = manifest_for(cfg);
  const SplitSpec split = cli::resolve_split(cfg.split, m);
  const fs::path dir = prepare_output(cfg);
  const auto rows = alpha_sweep(m, split, alphas, cfg.protocol);
  write_sweep(dir, rows, m.condition_set.labels);
  write(dir / "config.ini", cli::config_to_ini(cfg));
  std::cout << format_sweep_table(rows, m.condition_set.labels);
  return 0;
}

struct ReportInput {
  std::string name;
  std::vector<std::string> labels;
  std::vector<nlohmann::json> rows;  // performance records
  double average = 0.0;
};

ReportInput read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  ReportInput r;
  r.name = path;
  std::string line;
  bool have_summary = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ": " + e.what());
    }
    const std::string rec = j.value("record", "");
    if (rec == "performance") {
      r.rows.push_back(j);
    } else if (rec == "summary") {
      r.average = j.at("average").get<double>();
      r.name = j.at("model").get<std::string>();
      if (!j.at("alpha").is_null()) r.name += " (alpha " + format_percent(j.at("alpha").get<double>() * 100) + "%)";
      have_summary = true;
    } else if (rec == "confusion") {
      r.labels = j.at("labels").get<std::vector<std::string>>();
    }
  }
  if (!have_summary || r.rows.empty() || r.labels.empty()) {
    throw FormatError(path + ": not a talkcond report.jsonl");
  }
  return r;
}

std::vector<double> per_condition(const nlohmann::json& row, const std::vector<std::string>& labels) {
  std::vector<double> out;
  for (const auto& l : labels) out.push_back(row.at("identification").at(l).get<double>());
  return out;
}

int cmd_report(const std::vector<std::string>& inputs, const std::optional<std::string>& out) {
  std::vector<ReportInput> reports;
  for (const auto& path : inputs) reports.push_back(read_report(path));
  const auto& labels = reports.front().labels;
  for (const auto& r : reports) {
    if (r.labels != labels) throw FormatError(r.name + ": condition labels differ between reports");
  }
  std::ostringstream os;
  os << "Identification performance (%)\n";
  const std::size_t w = 10;
  const auto pad = [](const std::string& s, std::size_t width) {
    return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
  };
  os << pad("Model", 24) << pad("Gender", w);
  for (const auto& l : labels) os << pad(l, w);
  os << "Average\n";
  for (const auto& r : reports) {
    for (const auto& row : r.rows) {
      os << pad(r.name, 24) << pad(row.at("group").get<std::string>(), w);
      const auto pct = per_condition(row, labels);
      for (double v : pct) os << pad(format_percent(v), w);
      os << format_percent(average_performance(pct)) << "\n";
    }
  }
  if (reports.size() >= 2) {
    const auto& best = reports.back();
    const auto best_avg = per_condition(best.rows.back(), labels);
    for (std::size_t b = 0; b + 1 < reports.size(); ++b) {
      const auto base = per_condition(reports[b].rows.back(), labels);
      os << "\nRelative improvement (%) of " << best.name << " over " << reports[b].name << "\n";
      for (const auto& l : labels) os << pad(l, w);
      os << "Average\n";
      for (std::size_t v = 0; v < labels.size(); ++v) {
        os << pad(base[v] > 0 ? format_percent(relative_improvement(best_avg[v], base[v])) : "n/a", w);
      }
      os << (reports[b].average > 0 ? format_percent(relative_improvement(best.average, reports[b].average))
                                    : "n/a")
         << "\n";
    }
  }
  if (out) write(*out, os.str());
  std::cout << os.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Talking-condition identification with HMM, CHMM2 and SPHMM models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "talkcond 0.1.0");
  app.add_flag_callback("--list-isas", [] {
    for (kernels::Isa isa : kernels::available_isas()) std::cout << kernels::isa_name(isa) << "\n";
    std::cout << "active " << kernels::isa_name(kernels::active_isa()) << "\n";
    std::exit(0);
  }, "Print the vector kernels this machine supports");

  Overrides o;
  std::string bank_path;
  std::optional<std::string> sweep_range;
  std::string sweep_required;
  std::vector<std::string> report_inputs;
  std::optional<std::string> report_out;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  add_config_flags(synth, o);
  synth->add_option("--preset", o.preset, "stress | emotion | prosody");
  synth->add_option("--speakers", o.speakers, "Number of speakers");
  synth->add_option("--sentences", o.sentences, "Number of sentences");
  synth->add_option("--repetitions", o.repetitions, "Repetitions per sentence");
  synth->add_option("--seed", o.synth_seed, "Generator seed");
  synth->add_flag("--paper-shaped", o.paper_shaped, "30 speakers x 8 sentences x 9 repetitions");

  auto* train = app.add_subcommand("train", "Train one model per condition and save the bank");
  add_config_flags(train, o);
  add_model_flags(train, o);
  add_train_flags(train, o);

  auto* evaluate = app.add_subcommand("evaluate", "Identify the test split with a saved bank");
  add_config_flags(evaluate, o);
  add_model_flags(evaluate, o);
  evaluate->add_option("-b,--bank", bank_path, "Bank file from 'train'")->required();
  evaluate->add_option("--alpha-sweep", sweep_range, "start:stop:step, sphmm banks only");

  auto* sweep = app.add_subcommand("sweep", "Train an sphmm bank and sweep alpha");
  add_config_flags(sweep, o);
  add_model_flags(sweep, o);
  add_train_flags(sweep, o);
  sweep->add_option("--alpha-sweep", sweep_required, "start:stop:step")->default_val("0.0:1.0:0.1");

  auto* report = app.add_subcommand("report", "Combine report.jsonl files into one table");
  report->add_option("inputs", report_inputs, "report.jsonl files; the last is compared to the others")
      ->required();
  report->add_option("-o,--out", report_out, "Also write the table to this file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(o);
    if (*train) return cmd_train(o);
    if (*evaluate) return cmd_evaluate(o, bank_path, sweep_range);
    if (*sweep) return cmd_sweep(o, sweep_required);
    if (*report) return cmd_report(report_inputs, report_out);
  } catch (const Error& e) {
    std::cerr << "talkcond: error in stage '" << e.stage() << "': " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "talkcond: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
