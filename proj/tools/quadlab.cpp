#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "quadlab/distributions.hpp"
#include "quadlab/experiments.hpp"
#include "quadlab/functionals.hpp"
#include "quadlab/portfolio.hpp"
#include "quadlab/regression.hpp"
#include "quadlab/report.hpp"
#include "quadlab/sparse.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace quadlab;

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Writes text to `path`, or stdout when path is empty.
void deliver(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
}

double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw std::invalid_argument(what + ": '" + s + "' is not a number");
  return v;
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() != 3) throw std::invalid_argument("--sweep expects x0:x1:step");
  return make_grid(parse_double(parts[0], "--sweep x0"), parse_double(parts[1], "--sweep x1"),
                   parse_double(parts[2], "--sweep step"));
}

Eigen::MatrixXd matrix_from_csv(const CsvTable& csv) {
  if (csv.rows.empty()) throw CsvError("CSV has a header but no data rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(csv.rows.size()), static_cast<Eigen::Index>(csv.header.size()));
  for (std::size_t i = 0; i < csv.rows.size(); ++i)
    for (std::size_t j = 0; j < csv.header.size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = csv.rows[i][j];
  return m;
}

json model_json(const LinearModel& m, const std::vector<std::string>& features) {
  json coef = json::object();
  for (std::size_t j = 0; j < features.size(); ++j) coef[features[j]] = m.coefficients(static_cast<Eigen::Index>(j));
  return {{"intercept", m.intercept}, {"coefficients", to_vector(m.coefficients)}, {"features", features},
          {"named_coefficients", coef}};
}

std::string report_text(const ReportTable& t, ReportFormat f) {
  std::ostringstream out;
  if (f == ReportFormat::csv) write_csv(out, t);
  else out << to_json(t).dump(2) << '\n';
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quadlab: risk quadrangle regression, portfolio and sparse regression tools"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a linear regression under an error function");
  std::string fit_method = "ols", fit_input, fit_target, fit_output = "json", fit_out;
  std::optional<double> fit_alpha, fit_x;
  std::string fit_form = "compact";
  fit->add_option("--method", fit_method, "ols | quantile | se | bmr")->check(CLI::IsMember({"ols", "quantile", "se", "bmr"}));
  fit->add_option("--alpha", fit_alpha, "Quantile level in (0, 1)");
  fit->add_option("--x", fit_x, "Bias parameter for bmr");
  fit->add_option("--input", fit_input, "CSV with a header row")->required()->check(CLI::ExistingFile);
  fit->add_option("--target", fit_target, "Response column")->required();
  fit->add_option("--output", fit_output, "Output format")->check(CLI::IsMember({"json"}));
  fit->add_option("--out", fit_out, "Write to this file instead of stdout");
  fit->add_option("--lp-form", fit_form, "compact | epigraph")->check(CLI::IsMember({"compact", "epigraph"}));

  // portfolio
  auto* port = app.add_subcommand("portfolio", "Deviation-minimizing portfolio over return scenarios");
  std::string port_objective = "se", port_input, port_sweep, port_format = "json", port_out, port_choice = "upper";
  std::optional<double> port_x, port_alpha;
  double port_mu = 0.0;
  bool port_long = false;
  port->add_option("--objective", port_objective, "se | cvar")->check(CLI::IsMember({"se", "cvar"}));
  port->add_option("--x", port_x, "Bias parameter (se)");
  port->add_option("--alpha", port_alpha, "Confidence level (cvar)");
  port->add_option("--mu", port_mu, "Target mean return")->required();
  port->add_option("--input", port_input, "Scenario CSV, one column per asset")->required()->check(CLI::ExistingFile);
  port->add_option("--sweep", port_sweep, "x0:x1:step; runs the SE/CVaR equivalence sweep");
  port->add_option("--alpha-choice", port_choice, "Level used by the sweep: upper | certified | lower")
      ->check(CLI::IsMember({"upper", "certified", "lower"}));
  port->add_flag("--long-only", port_long, "Forbid short positions");
  port->add_option("--format", port_format, "json | csv (sweep only)")->check(CLI::IsMember({"json", "csv"}));
  port->add_option("--out", port_out, "Write to this file instead of stdout");

  // sparse
  auto* sp = app.add_subcommand("sparse", "Best-subset regression with at most k slopes");
  std::string sp_error = "se", sp_input, sp_target, sp_big_m = "auto", sp_out;
  int sp_k = 1;
  double sp_time = 60.0, sp_gap = 1e-9;
  bool sp_oracle = false;
  sp->add_option("--error", sp_error, "mse | se")->check(CLI::IsMember({"mse", "se"}));
  sp->add_option("--k", sp_k, "Maximum number of nonzero slopes")->required()->check(CLI::PositiveNumber);
  sp->add_option("--time-limit", sp_time, "Seconds")->check(CLI::PositiveNumber);
  sp->add_option("--gap", sp_gap, "Relative optimality gap")->check(CLI::NonNegativeNumber);
  sp->add_option("--big-m", sp_big_m, "auto or a positive bound on |c_j| (se)");
  sp->add_flag("--oracle", sp_oracle, "Also run exhaustive search and report it");
  sp->add_option("--input", sp_input, "CSV with a header row")->required()->check(CLI::ExistingFile);
  sp->add_option("--target", sp_target, "Response column")->required();
  sp->add_option("--out", sp_out, "Write to this file instead of stdout");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Write a synthetic dataset as CSV");
  std::string sim_kind = "linear", sim_out;
  std::size_t sim_n = 1000;
  std::uint64_t sim_seed = 1;
  double sim_shape = 10.0, sim_noise = 1.0, sim_rho = 0.9;
  int sim_d = 30, sim_k = 3;
  sim->add_option("--kind", sim_kind, "linear | skew-normal | returns | factors | sparse")
      ->check(CLI::IsMember({"linear", "skew-normal", "returns", "factors", "sparse"}));
  sim->add_option("--n", sim_n, "Rows")->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "Base seed");
  sim->add_option("--shape", sim_shape, "Skew-normal shape");
  sim->add_option("--noise-scale", sim_noise, "Noise multiplier (linear, sparse)")->check(CLI::NonNegativeNumber);
  sim->add_option("--d", sim_d, "Regressors (sparse)")->check(CLI::PositiveNumber);
  sim->add_option("--k-star", sim_k, "True nonzero slopes (sparse)")->check(CLI::PositiveNumber);
  sim->add_option("--rho", sim_rho, "Design correlation rho^|i-j| (sparse)");
  sim->add_option("--out", sim_out, "Write to this file instead of stdout");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a quadrangle on a sample");
  std::string ev_family = "biased-mean", ev_input, ev_column, ev_weights, ev_values, ev_out;
  std::optional<double> ev_alpha, ev_x;
  ev->add_option("--family", ev_family, "quantile | biased-mean | mean-l1")
      ->check(CLI::IsMember({"quantile", "biased-mean", "mean-l1"}));
  ev->add_option("--alpha", ev_alpha, "Confidence level (quantile)");
  ev->add_option("--x", ev_x, "Bias parameter (biased-mean)");
  ev->add_option("--input", ev_input, "CSV file")->check(CLI::ExistingFile);
  ev->add_option("--column", ev_column, "Loss column in --input");
  ev->add_option("--weights", ev_weights, "Probability column in --input (default: equal)");
  ev->add_option("--values", ev_values, "Comma-separated sample instead of --input");
  ev->add_option("--out", ev_out, "Write to this file instead of stdout");

  // experiment
  auto* ex = app.add_subcommand("experiment", "Run a reproduction experiment");
  std::string ex_id, ex_config, ex_dir, ex_format = "csv";
  ex->add_option("--id", ex_id, "tables345 | fig1_sweep | table2_pattern | sparse_recovery")->required();
  ex->add_option("--config", ex_config, "JSON overrides")->check(CLI::ExistingFile);
  ex->add_option("--output-dir", ex_dir, "Directory for one file per table (default: stdout)");
  ex->add_option("--format", ex_format, "csv | json")->check(CLI::IsMember({"csv", "json"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) {
      const LabeledDataset ld = load_csv(fit_input, fit_target);
      FitOptions opt;
      opt.form = fit_form == "epigraph" ? LpForm::epigraph : LpForm::compact;
      FitResult r;
      json params = json::object();
      if (fit_method == "ols") {
        r = fit_ols(ld.data);
      } else if (fit_method == "quantile") {
        if (!fit_alpha) throw std::invalid_argument("--method quantile requires --alpha");
        r = fit_quantile(ld.data, ConfidenceLevel(*fit_alpha), opt);
        params["alpha"] = *fit_alpha;
      } else if (fit_method == "se") {
        r = fit_se(ld.data, opt);
        params["x"] = 0.0;
      } else {
        if (!fit_x) throw std::invalid_argument("--method bmr requires --x");
        r = fit_biased_mean(ld.data, BiasParam{*fit_x}, opt);
        params["x"] = *fit_x;
      }
      json out = model_json(r.model, ld.features);
      out["method"] = fit_method;
      out["params"] = params;
      out["target"] = fit_target;
      out["objective"] = r.objective;
      out["induced_alpha"] = {r.induced_alpha[0], r.induced_alpha[1]};
      if (r.certified_alpha) out["certified_alpha"] = *r.certified_alpha;
      if (r.regularized) out["regularized"] = true;
      deliver(out.dump(2) + "\n", fit_out);
    } else if (*port) {
      const CsvTable csv = read_csv(port_input);
      PortfolioProblem p{matrix_from_csv(csv), port_mu, port_long};
      if (!port_sweep.empty()) {
        if (port_objective != "se") throw std::invalid_argument("--sweep runs over x and needs --objective se");
        AlphaChoice choice = port_choice == "certified" ? AlphaChoice::certified
                             : port_choice == "lower"   ? AlphaChoice::lower
                                                        : AlphaChoice::upper;
        const auto rows = equivalence_sweep(p.returns, port_mu, parse_grid(port_sweep), choice, port_long);
        ReportTable t;
        t.name = "portfolio_sweep";
        t.columns = {"x", "alpha", "alpha_lo", "alpha_hi", "se_dev_opt", "cvar_dev_at_se_opt",
                     "cvar_dev_opt", "se_dev_at_cvar_opt", "cvar_gap", "se_gap"};
        json errors = json::array();
        for (const auto& r : rows) {
          if (!r.error.empty()) errors.push_back({{"x", r.x}, {"error", r.error}});
          t.add_row({r.x, r.alpha, r.alpha_lo, r.alpha_hi, r.se_dev_opt, r.cvar_dev_at_se_opt, r.cvar_dev_opt,
                     r.se_dev_at_cvar_opt, r.error.empty() ? r.cvar_gap() : NAN,
                     r.error.empty() ? r.se_gap() : NAN});
        }
        t.metadata = {{"target_mean", port_mu}, {"long_only", port_long}, {"alpha_choice", port_choice},
                      {"row_errors", errors}};
        deliver(report_text(t, parse_report_format(port_format)), port_out);
        if (!errors.empty()) {
          for (const auto& e : errors) std::cerr << "x = " << e["x"] << ": " << e["error"].get<std::string>() << '\n';
          return 2;
        }
      } else {
        PortfolioSolution s;
        json params = json::object();
        if (port_objective == "se") {
          if (!port_x) throw std::invalid_argument("--objective se requires --x");
          s = optimize_se_dev(p, BiasParam{*port_x});
          params["x"] = *port_x;
        } else {
          if (!port_alpha) throw std::invalid_argument("--objective cvar requires --alpha");
          s = optimize_cvar_dev(p, ConfidenceLevel(*port_alpha));
          params["alpha"] = *port_alpha;
        }
        json named = json::object();
        for (std::size_t j = 0; j < csv.header.size(); ++j) named[csv.header[j]] = s.weights(static_cast<Eigen::Index>(j));
        json out{{"objective", port_objective}, {"params", params}, {"target_mean", port_mu},
                 {"long_only", port_long}, {"weights", to_vector(s.weights)}, {"assets", csv.header},
                 {"named_weights", named}, {"deviation", s.deviation}};
        if (port_objective == "se") out["induced_alpha"] = {s.induced_alpha[0], s.induced_alpha[1]};
        if (s.certified_alpha) out["certified_alpha"] = *s.certified_alpha;
        if (s.zeta) out["zeta"] = *s.zeta;
        deliver(out.dump(2) + "\n", port_out);
      }
    } else if (*sp) {
      const LabeledDataset ld = load_csv(sp_input, sp_target);
      SparseProblem p{ld.data, sp_k, sp_error == "mse" ? ErrorKind::mse : ErrorKind::se, std::nullopt, sp_time, sp_gap};
      if (sp_big_m != "auto") {
        const double m = parse_double(sp_big_m, "--big-m");
        if (!(m > 0.0)) throw std::invalid_argument("--big-m must be positive or 'auto'");
        p.big_m = m;
      }
      const SparseSolution s = fit_sparse(p);
      json out = model_json(s.model, ld.features);
      json names = json::array();
      for (int j : s.support) names.push_back(ld.features[static_cast<std::size_t>(j)]);
      out.update({{"error", sp_error}, {"k", sp_k}, {"support", s.support}, {"support_names", names},
                  {"objective", s.objective}, {"bound", s.bound}, {"gap", s.gap},
                  {"status", std::string(lp::to_string(s.status))}, {"nodes", s.nodes}, {"time_s", s.time_s}});
      if (p.error == ErrorKind::se) out.update({{"big_m", s.big_m}, {"big_m_active", s.big_m_active}});
      if (sp_oracle) {
        const SparseSolution o = brute_force_subset(ld.data, sp_k, p.error);
        out["oracle"] = {{"support", o.support}, {"objective", o.objective}, {"time_s", o.time_s}};
      }
      deliver(out.dump(2) + "\n", sp_out);
    } else if (*sim) {
      std::ostringstream out;
      if (sim_kind == "linear") {
        LabeledDataset ld{simulate_linear_skew(sim_n, sim_shape, sim_noise, sim_seed), {"x"}, "y"};
        write_dataset_csv(out, ld);
      } else if (sim_kind == "skew-normal") {
        out << "eps\n";
        for (double v : sample_skew_normal({sim_shape, true}, sim_n, sim_seed)) out << format_double(v) << '\n';
      } else if (sim_kind == "returns") {
        const ReturnsSpec spec;
        const Eigen::MatrixXd r = sample_returns(spec, sim_n, sim_seed);
        ReportTable t;
        for (Eigen::Index j = 0; j < r.cols(); ++j) t.columns.push_back("asset" + std::to_string(j + 1));
        for (Eigen::Index i = 0; i < r.rows(); ++i) t.add_row(to_vector(r.row(i).transpose()));
        write_csv(out, t);
      } else if (sim_kind == "factors") {
        LabeledDataset ld{simulate_factor_dataset(FactorSpec{}, sim_n, sim_seed), {"f1", "f2", "f3", "f4"}, "y"};
        write_dataset_csv(out, ld);
      } else {
        if (sim_k > sim_d) throw std::invalid_argument("--k-star must not exceed --d");
        const SparseInstance inst = simulate_sparse(sim_n, sim_d, sim_k, sim_rho, sim_noise, sim_seed);
        LabeledDataset ld{inst.data, {}, "y"};
        for (int j = 0; j < sim_d; ++j) ld.features.push_back("x" + std::to_string(j + 1));
        write_dataset_csv(out, ld);
      }
      deliver(out.str(), sim_out);
    } else if (*ev) {
      std::vector<double> values, weights;
      if (!ev_values.empty()) {
        if (!ev_input.empty()) throw std::invalid_argument("use either --values or --input, not both");
        std::stringstream ss(ev_values);
        for (std::string p; std::getline(ss, p, ',');) values.push_back(parse_double(p, "--values"));
      } else {
        if (ev_input.empty() || ev_column.empty()) throw std::invalid_argument("eval needs --values or --input with --column");
        const CsvTable csv = read_csv(ev_input);
        const std::size_t c = csv.column_index(ev_column);
        for (const auto& row : csv.rows) values.push_back(row[c]);
        if (!ev_weights.empty()) {
          const std::size_t w = csv.column_index(ev_weights);
          for (const auto& row : csv.rows) weights.push_back(row[w]);
        }
      }
      const EmpiricalSample s = weights.empty() ? make_sample(values)
                                                : make_sample(values, std::span<const double>(weights));
      QuadrangleEval q;
      if (ev_family == "quantile") {
        if (!ev_alpha) throw std::invalid_argument("--family quantile requires --alpha");
        q = eval_quantile_quadrangle(s, ConfidenceLevel(*ev_alpha));
      } else if (ev_family == "biased-mean") {
        if (!ev_x) throw std::invalid_argument("--family biased-mean requires --x");
        q = eval_biased_mean_quadrangle(s, BiasParam{*ev_x});
      } else {
        q = eval_mean_l1_quadrangle(s);
      }
      json out{{"family", std::string(to_string(q.family))}, {"param", q.param}, {"risk", q.risk},
               {"deviation", q.deviation}, {"regret", q.regret}, {"error", q.error}, {"statistic", q.statistic},
               {"n", s.size()}};
      if (q.statistic_interval) out["statistic_interval"] = {q.statistic_interval->lower, q.statistic_interval->upper};
      deliver(out.dump(2) + "\n", ev_out);
    } else if (*ex) {
      const ExperimentId id = parse_experiment_id(ex_id);
      ExperimentConfig cfg = ExperimentConfig::defaults(id);
      if (!ex_config.empty()) {
        std::ifstream in(ex_config);
        json j;
        try {
          in >> j;
        } catch (const json::exception& e) {
          throw std::invalid_argument("config " + ex_config + ": " + e.what());
        }
        cfg = ExperimentConfig::from_json(id, j);
      }
      const ReportFormat fmt = parse_report_format(ex_format);
      const ExperimentResult r = run_experiment(id, cfg);
      if (!ex_dir.empty()) {
        fs::create_directories(ex_dir);
        for (const auto& t : r.tables) {
          const fs::path base = fs::path(ex_dir) / t.name;
          if (fmt == ReportFormat::csv) {
            emit_report(t, fs::path(base).replace_extension(".csv"), fmt);
            deliver(t.metadata.dump(2) + "\n", fs::path(base).replace_extension(".meta.json").string());
          } else {
            emit_report(t, fs::path(base).replace_extension(".json"), fmt);
          }
        }
      } else {
        for (const auto& t : r.tables) {
          if (fmt == ReportFormat::csv) std::cout << "# " << t.name << '\n';
          std::cout << report_text(t, fmt);
        }
      }
      for (const auto& v : r.verdicts)
        std::cerr << (v.passed ? "PASS " : "FAIL ") << v.name << ": " << v.detail << '\n';
      std::cerr << "runtime " << format_double(r.runtime_s) << " s\n";
      return r.passed() ? 0 : 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
