// regretcal: regret-based diagnostics for probabilistic binary classifiers.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "regretcal/regretcal.hpp"

namespace fs = std::filesystem;
using namespace regretcal;
using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSplit:
    case ErrorCode::DegenerateUtility:
    case ErrorCode::ThresholdOutOfRange:
    case ErrorCode::ThresholdAtBoundary:
    case ErrorCode::NonPositiveBins:
    case ErrorCode::InadmissibleSpec:
    case ErrorCode::UnsupportedThreshold:
    case ErrorCode::TooManyLevels:
    case ErrorCode::InvalidOracle:
    case ErrorCode::InvalidConfig:
      return 2;
    case ErrorCode::MalformedRow:
    case ErrorCode::ScoreOutOfRange:
    case ErrorCode::LabelNotBinary:
    case ErrorCode::InconsistentFeatureDim:
    case ErrorCode::MissingColumn:
    case ErrorCode::FileNotFound:
    case ErrorCode::EmptyDataset:
    case ErrorCode::TooFewSamples:
    case ErrorCode::EmptyInput:
    case ErrorCode::LengthMismatch:
    case ErrorCode::SingleClass:
    case ErrorCode::NoFeatures:
      return 3;
    default:
      return 4;
  }
}

struct Options {
  RunConfig cfg;
  std::vector<double> utility;
  std::string method = "isotonic";
  std::string spec;
  std::string suite;
  std::size_t n = 10000;
};

void add_common(CLI::App* cmd, Options& o, bool needs_input) {
  auto* in = cmd->add_option("--input", o.cfg.input, "Scored dataset (.csv with y,score,f0.. or .jsonl)");
  if (needs_input) in->required();
  cmd->add_option("--out", o.cfg.out, "Output directory")->capture_default_str();
  cmd->add_option("--bins", o.cfg.bins, "Equal-mass score bins")->capture_default_str();
  cmd->add_option("--max-leaves", o.cfg.max_leaves, "Regions per bin")->capture_default_str();
  cmd->add_option("--min-leaf", o.cfg.min_leaf, "Minimum samples per region")->capture_default_str();
  cmd->add_option("--glar-gate", o.cfg.glar_gate, "GLAR regret gate r")->capture_default_str();
  cmd->add_option("--advise-gate", o.cfg.advise_gate, "Advisory regret gate")->capture_default_str();
  auto* ts = cmd->add_option("--tstar", o.cfg.tstars, "Comma-separated optimal thresholds")->delimiter(',');
  auto* ut = cmd->add_option("--utility", o.utility, "u00,u01,u10,u11")->delimiter(',')->expected(4);
  ts->excludes(ut);
  cmd->add_option("--fit-fraction", o.cfg.fit_fraction, "Share of rows used for fitting")->capture_default_str();
  cmd->add_option("--seed", o.cfg.seed, "Random seed")->capture_default_str();
}

void finalize(Options& o) {
  if (!o.utility.empty()) {
    if (o.utility.size() != 4) throw Error(ErrorCode::InvalidConfig, "--utility needs four values");
    o.cfg.utility = UtilityMatrix{o.utility[0], o.utility[1], o.utility[2], o.utility[3]};
    o.cfg.tstars = {optimal_threshold(*o.cfg.utility)};
  }
  o.cfg.validate();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FileNotFound, "cannot write " + path.string());
  out << content;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

fs::path prepare_out(const RunConfig& cfg) {
  fs::path dir(cfg.out);
  fs::create_directories(dir);
  return dir;
}

// Report closest to t* = 1/2 is the one plotted.
std::size_t plotted_report(const std::vector<RegretReport>& reports) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < reports.size(); ++i)
    if (std::abs(reports[i].t_star - 0.5) < std::abs(reports[best].t_star - 0.5)) best = i;
  return best;
}

json report_json(const std::string& command, const RunConfig& cfg, const ReportRun& run) {
  json j = run.diagnosis;
  j["schema_version"] = kSchemaVersion;
  j["command"] = command;
  j["config"] = cfg;
  j["n"] = run.n_total;
  j["n_eval"] = run.n_eval;
  j["n_tree_fit"] = run.n_tree_fit;
  return j;
}

int cmd_report(Options& o) {
  finalize(o);
  const auto ds = load_dataset(o.cfg.input);
  const auto run = run_report(ds, o.cfg);
  const auto dir = prepare_out(o.cfg);
  const auto& d = run.diagnosis;
  write_file(dir / "report.json", dump(report_json("report", o.cfg, run)));
  std::ostringstream bins;
  write_bins_csv(bins, d.reports);
  write_file(dir / "bins.csv", bins.str());
  const auto& shown = d.reports[plotted_report(d.reports)];
  write_file(dir / "reliability.svg", reliability_svg(d.curve, shown.t_star));
  write_file(dir / "regret.svg", regret_svg(shown));
  for (const auto& r : d.reports) {
    std::cout << "t*=" << detail::format_double(r.t_star) << " rcl=" << detail::format_double(r.rcl_hat)
              << " rgl=" << detail::format_double(r.rgl_hat) << " r=" << detail::format_double(r.r_hat) << "\n";
  }
  return 0;
}

int cmd_advise(Options& o) {
  finalize(o);
  const auto ds = load_dataset(o.cfg.input);
  const auto run = run_report(ds, o.cfg);
  const auto dir = prepare_out(o.cfg);
  json advice = json::array();
  for (const auto& r : run.diagnosis.reports) {
    const auto a = advise(r, o.cfg.advise_gate);
    json item = a;
    item["t_star"] = r.t_star;
    advice.push_back(item);
    std::cout << "t*=" << detail::format_double(r.t_star) << ": " << to_string(a.verdict) << " (" << a.rationale << ")\n";
  }
  write_file(dir / "advice.json",
             dump({{"schema_version", kSchemaVersion}, {"command", "advise"}, {"config", o.cfg}, {"advice", advice}}));
  return 0;
}

int cmd_posttrain(Options& o) {
  finalize(o);
  const auto method = parse_method(o.method);
  const auto ds = load_dataset(o.cfg.input);
  validate(ds);
  if (needs_features(method) && ds.feature_dim() == 0) {
    throw Error(ErrorCode::NoFeatures, o.method + " needs feature columns");
  }
  const auto us = o.cfg.utilities();
  const auto folds = make_folds(ds, o.cfg);
  const auto outcome = run_method(method, folds, o.cfg, us);
  const ScoredDataset* tree_fit = ds.feature_dim() > 0 ? &folds.fit : nullptr;
  const auto before = diagnose(folds.eval, tree_fit, o.cfg, us);

  json after;
  if (method == Method::Threshold) {
    after = diagnose(folds.eval, tree_fit, o.cfg, us, outcome.thresholds);
  } else if (outcome.corrected.size() == 1) {
    const auto eval = folds.eval.with_scores(outcome.corrected.front());
    const auto fit = folds.fit.with_scores(outcome.corrected_fit.front());
    after = diagnose(eval, tree_fit ? &fit : nullptr, o.cfg, us);
  } else {
    // one corrected score vector per utility
    Diagnosis merged;
    for (std::size_t i = 0; i < us.size(); ++i) {
      const auto eval = folds.eval.with_scores(outcome.corrected[i]);
      const auto fit = folds.fit.with_scores(outcome.corrected_fit[i]);
      auto d = diagnose(eval, tree_fit ? &fit : nullptr, o.cfg, {us[i]});
      if (i == 0) merged = d;
      else merged.reports.push_back(d.reports.front());
    }
    after = merged;
    after["note"] = "binning, grouping_loss and baseline_metrics refer to the first utility";
  }

  const auto dir = prepare_out(o.cfg);
  std::ostringstream csv;
  csv << "row,y,score";
  std::vector<std::string> cols;
  if (method == Method::Threshold) {
    for (double t : outcome.t_star) cols.push_back("decision_t" + detail::format_double(t));
  } else if (outcome.corrected.size() == 1) {
    cols.push_back("corrected");
  } else {
    for (double t : outcome.t_star) cols.push_back("corrected_t" + detail::format_double(t));
  }
  for (const auto& c : cols) csv << ',' << c;
  csv << '\n';
  for (std::size_t i = 0; i < folds.eval.size(); ++i) {
    const auto& s = folds.eval[i];
    csv << folds.eval.row_ids()[i] << ',' << s.label << ',' << detail::format_double(s.score);
    if (method == Method::Threshold) {
      for (double t : outcome.thresholds) csv << ',' << (s.score >= t ? 1 : 0);
    } else {
      for (const auto& col : outcome.corrected) csv << ',' << detail::format_double(col[i]);
    }
    csv << '\n';
  }
  write_file(dir / "corrected.csv", csv.str());

  json before_j = before;
  write_file(dir / "reports.json", dump({{"schema_version", kSchemaVersion},
                                         {"command", "posttrain"},
                                         {"method", o.method},
                                         {"config", o.cfg},
                                         {"n_fit", folds.fit.size()},
                                         {"n_eval", folds.eval.size()},
                                         {"before", before_j},
                                         {"after", after}}));

  std::ostringstream gain;
  gain << "t_star,eu_before,eu_after,gain,r_hat_before,rcl_hat_before,rgl_hat_before\n";
  for (std::size_t i = 0; i < outcome.t_star.size(); ++i) {
    const auto& r = before.reports[i];
    gain << detail::format_double(outcome.t_star[i]) << ',' << detail::format_double(outcome.eu_before[i]) << ','
         << detail::format_double(outcome.eu_after[i]) << ',' << detail::format_double(outcome.gain[i]) << ','
         << detail::format_double(r.r_hat) << ',' << detail::format_double(r.rcl_hat) << ','
         << detail::format_double(r.rgl_hat) << '\n';
    std::cout << "t*=" << detail::format_double(outcome.t_star[i]) << " gain=" << detail::format_double(outcome.gain[i])
              << " r_hat=" << detail::format_double(r.r_hat) << "\n";
  }
  write_file(dir / "gain.csv", gain.str());
  json summary = outcome;
  summary["schema_version"] = kSchemaVersion;
  write_file(dir / "gain.json", dump(summary));
  return 0;
}

OracleDistribution oracle_from_spec(const json& spec, std::uint64_t seed, std::vector<double>& default_tstars) {
  const auto kind = spec.value("kind", std::string{});
  if (kind == "lb_tight" || kind == "ub_tight") {
    TightnessSpec t{spec.at("c").get<double>(), spec.at("v").get<double>(), spec.value("t", 0.5),
                    kind == "lb_tight" ? BoundKind::Lower : BoundKind::Upper};
    default_tstars = {t.t};
    return kind == "lb_tight" ? build_lb_tight(t) : build_ub_tight(t);
  }
  if (kind == "random") {
    RandomOracleOptions opt;
    opt.monotone = spec.value("monotone", false);
    opt.calibrated = spec.value("calibrated", false);
    opt.max_spread = spec.value("max_spread", 0.5);
    return random_oracle(spec.value("seed", seed), spec.value("levels", std::size_t{10}),
                         spec.value("atoms_per_level", std::size_t{3}), opt);
  }
  if (kind == "distorted") {
    const auto slope = spec.value("slope", std::vector<double>{0.4, 2.5});
    if (slope.size() != 2) throw Error(ErrorCode::InvalidConfig, "slope needs [lo, hi]");
    return distorted_oracle(spec.value("seed", seed), spec.value("levels", std::size_t{200}),
                            spec.value("atoms_per_level", std::size_t{1}), spec.value("max_spread", 0.0), slope[0],
                            slope[1], spec.value("bias", 1.0));
  }
  if (kind == "oracle") return spec.at("oracle").get<OracleDistribution>();
  throw Error(ErrorCode::InvalidConfig, "unknown spec kind '" + kind + "'");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
}

int cmd_simulate(Options& o, bool tstar_given) {
  if (o.n == 0) throw Error(ErrorCode::InvalidConfig, "--n must be positive");
  std::vector<double> tight_tstars;
  const auto spec = read_json_file(o.spec);
  const auto oracle = oracle_from_spec(spec, o.cfg.seed, tight_tstars);
  if (!tstar_given && o.utility.empty() && !tight_tstars.empty()) o.cfg.tstars = tight_tstars;
  if (!o.utility.empty()) {
    if (o.utility.size() != 4) throw Error(ErrorCode::InvalidConfig, "--utility needs four values");
    o.cfg.utility = UtilityMatrix{o.utility[0], o.utility[1], o.utility[2], o.utility[3]};
  }
  const auto ds = sample(oracle, o.n, o.cfg.seed);
  const auto dir = prepare_out(o.cfg);
  std::ostringstream csv;
  write_csv(csv, ds);
  write_file(dir / "dataset.csv", csv.str());
  write_file(dir / "oracle.json", dump(json(oracle)));

  json exact = json::array();
  std::vector<UtilityMatrix> us;
  if (o.cfg.utility) us.push_back(*o.cfg.utility);
  else
    for (double t : o.cfg.tstars) us.push_back(utility_matrix_from_tstar(t));
  for (const auto& u : us) {
    const auto e = exact_regrets(oracle, u, optimal_threshold(u));
    exact.push_back(e);
    std::cout << "t*=" << detail::format_double(e.t_star) << " exact rcl=" << detail::format_double(e.rcl)
              << " rgl=" << detail::format_double(e.rgl) << " r=" << detail::format_double(e.r) << "\n";
  }
  write_file(dir / "exact.json", dump({{"schema_version", kSchemaVersion},
                                       {"spec", spec},
                                       {"n", o.n},
                                       {"seed", o.cfg.seed},
                                       {"grouping_loss", exact_grouping_loss(oracle)},
                                       {"exact", exact}}));
  return 0;
}

int cmd_sweep(Options& o) {
  o.cfg.validate();
  const auto suite = load_suite(read_json_file(o.suite));
  const auto res = run_sweep(suite, o.cfg);
  const auto dir = prepare_out(o.cfg);

  std::ostringstream table;
  table << "estimator,method,r2\n";
  json cells = json::array();
  for (const auto& c : res.table) {
    table << c.estimator << ',' << c.method << ',' << (std::isnan(c.r2) ? std::string{} : detail::format_double(c.r2)) << '\n';
    cells.push_back({{"estimator", c.estimator}, {"method", c.method}, {"r2", std::isnan(c.r2) ? json(nullptr) : json(c.r2)}});
  }
  write_file(dir / "correlation.csv", table.str());

  std::ostringstream scatter;
  scatter << "label,seed,t_star";
  const auto& first = res.rows.front();
  for (const auto& [k, _] : first.estimators) scatter << ',' << k;
  for (const auto& [k, _] : first.gains) scatter << ",gain_" << k;
  scatter << '\n';
  for (const auto& r : res.rows) {
    scatter << r.label << ',' << r.seed << ',' << detail::format_double(r.t_star);
    for (const auto& [_, v] : r.estimators) scatter << ',' << detail::format_double(v);
    for (const auto& [_, v] : r.gains) scatter << ',' << detail::format_double(v);
    scatter << '\n';
  }
  write_file(dir / "scatter.csv", scatter.str());
  write_file(dir / "sweep.json", dump({{"schema_version", kSchemaVersion},
                                       {"suite", suite.name},
                                       {"runs", res.rows.size()},
                                       {"config", o.cfg},
                                       {"correlation", cells}}));
  for (const auto& c : res.table) {
    std::cout << c.estimator << " vs " << c.method << ": r2=" << (std::isnan(c.r2) ? std::string("nan") : detail::format_double(c.r2))
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regret-based diagnostics for probabilistic binary classifiers"};
  app.require_subcommand(1);
  Options o;

  auto* report = app.add_subcommand("report", "Estimate calibration and grouping regrets");
  add_common(report, o, true);
  auto* advise_cmd = app.add_subcommand("advise", "Recommend an action from the regret estimates");
  add_common(advise_cmd, o, true);
  auto* posttrain = app.add_subcommand("posttrain", "Apply a post-training method and measure utility gain");
  add_common(posttrain, o, true);
  posttrain->add_option("--method", o.method, "isotonic|platt|histogram|threshold|glar|logistic")->capture_default_str();
  auto* simulate = app.add_subcommand("simulate", "Sample a dataset from a synthetic oracle");
  add_common(simulate, o, false);
  simulate->add_option("--spec", o.spec, "Oracle spec JSON")->required();
  simulate->add_option("--n", o.n, "Samples to draw")->capture_default_str();
  auto* sweep = app.add_subcommand("sweep", "Correlate estimators with method gains over a synthetic suite");
  add_common(sweep, o, false);
  sweep->add_option("--suite", o.suite, "Suite JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (report->parsed()) return cmd_report(o);
    if (advise_cmd->parsed()) return cmd_advise(o);
    if (posttrain->parsed()) return cmd_posttrain(o);
    if (simulate->parsed()) return cmd_simulate(o, simulate->count("--tstar") > 0);
    if (sweep->parsed()) return cmd_sweep(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
