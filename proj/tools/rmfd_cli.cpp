// rmfd: select | estimate | irf | simulate

#include "rmfd/benchmark.hpp"
#include "rmfd/data.hpp"
#include "rmfd/echelon.hpp"
#include "rmfd/em.hpp"
#include "rmfd/init.hpp"
#include "rmfd/io.hpp"
#include "rmfd/linalg.hpp"
#include "rmfd/modelsel.hpp"
#include "rmfd/random.hpp"
#include "rmfd/sim.hpp"
#include "rmfd/structural.hpp"

#include <CLI11.hpp>

#include <Eigen/QR>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace rmfd;

namespace {

constexpr const char* kDataDirEnv = "RMFD_DATA_DIR";

Json default_config() {
  return Json::parse(R"({
    "data": "fredmd.csv",
    "processed": false,
    "scheme": "heavy",
    "class_map": null,
    "from": "1973-03",
    "to": "2007-11",
    "drop": ["ACOGNO", "UMCSENTx"],
    "order": [],
    "q": 4,
    "r": 8,
    "gamma": "select",
    "p": null,
    "s": null,
    "criterion": "bic",
    "em": {"max_iter": 1000, "tol": 1e-5, "variant": "corrected"},
    "init": {"S": 10, "seed": 1, "rho0": 10, "rho_steps": 10, "ridge": 0.1},
    "shock": "FEDFUNDS",
    "normalization": 0.5,
    "horizon": 48,
    "focal": [],
    "model": null,
    "bootstrap": {"draws": 0, "block_len": 52, "level": 0.68, "seed": 1, "warm_start": false},
    "benchmarks": {"enabled": false, "r": 8, "m": 2, "svar_vars": [], "svar_lags": 9},
    "truth": null,
    "output": "out",
    "jobs": 1,
    "simulate": {"n": 20, "T": 500, "gamma": [1, 1], "p": null, "s": null, "seed": 1, "snr": 4.0,
                 "burn_in": 500, "scale": 0.5, "max_radius": 0.9}
  })");
}

void merge(Json& base, const Json& over) {
  for (auto it = over.begin(); it != over.end(); ++it) {
    if (!base.contains(it.key())) throw ValidationError("unknown config key '" + it.key() + "'");
    if (base[it.key()].is_object() && it.value().is_object()) merge(base[it.key()], it.value());
    else base[it.key()] = it.value();
  }
}

template <class T>
T get(const Json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config '") + key + "': " + e.what());
  }
}

std::optional<int> opt_int(const Json& j, const char* key) {
  if (j.at(key).is_null()) return std::nullopt;
  return get<int>(j, key);
}

fs::path resolve_data(const std::string& p) {
  fs::path path(p);
  if (path.is_absolute() || fs::exists(path)) return path;
  if (const char* dir = std::getenv(kDataDirEnv)) return fs::path(dir) / path;
  return path;
}

struct Context {
  Json config;
  fs::path out;
  std::vector<std::string> artifacts;
  std::map<std::string, std::uint64_t> seeds;
  std::string command;

  void write(const std::string& name, const std::string& text) {
    write_text(out / name, text);
    artifacts.push_back(name);
  }
  void finish() {
    Manifest m{command, config, seeds, artifacts};
    write_text(out / (command + "_manifest.json"), manifest_json(m).dump(2) + "\n");
  }
};

EmOptions em_options(const Json& c) {
  const Json& e = c.at("em");
  EmOptions o;
  o.max_iter = get<int>(e, "max_iter");
  o.tol = get<double>(e, "tol");
  const auto v = get<std::string>(e, "variant");
  if (v == "corrected") o.moment_variant = MomentVariant::corrected;
  else if (v == "literal") o.moment_variant = MomentVariant::literal;
  else throw ValidationError("em.variant must be 'corrected' or 'literal'");
  o.validate();
  return o;
}

InitOptions init_options(const Json& c) {
  const Json& i = c.at("init");
  InitOptions o;
  o.S = get<int>(i, "S");
  o.seed = get<std::uint64_t>(i, "seed");
  o.rho0 = get<int>(i, "rho0");
  o.rho_steps = get<int>(i, "rho_steps");
  o.cca.ridge = get<double>(i, "ridge");
  if (o.S < 1) throw ValidationError("init.S must be >= 1");
  return o;
}

Criterion criterion(const Json& c) {
  const auto s = get<std::string>(c, "criterion");
  if (s == "aic") return Criterion::aic;
  if (s == "bic") return Criterion::bic;
  if (s == "hqic") return Criterion::hqic;
  throw ValidationError("criterion must be aic, bic or hqic");
}

Panel reorder(const Panel& p, const std::vector<std::string>& first) {
  if (first.empty()) return p;
  std::vector<std::string> order = first;
  for (const auto& m : p.mnemonics)
    if (std::find(first.begin(), first.end(), m) == first.end()) order.push_back(m);
  return select_columns(p, order);
}

// Processed (transformed, trimmed, cleaned) panel in transformed units.
Panel load_panel(const Json& c) {
  const fs::path path = resolve_data(get<std::string>(c, "data"));
  Panel raw = load_fredmd(path.string());
  Panel out;
  if (get<bool>(c, "processed")) {
    out = raw;
  } else {
    PanelPipeline pipe;
    const auto scheme = get<std::string>(c, "scheme");
    if (scheme == "heavy") pipe.scheme = TransformScheme::heavy;
    else if (scheme == "light") pipe.scheme = TransformScheme::light;
    else throw ValidationError("scheme must be 'heavy' or 'light'");
    pipe.from = YearMonth::parse(get<std::string>(c, "from"));
    pipe.to = YearMonth::parse(get<std::string>(c, "to"));
    pipe.drop = get<std::vector<std::string>>(c, "drop");
    ClassMap classes;
    if (!c.at("class_map").is_null()) classes = load_class_map(resolve_data(get<std::string>(c, "class_map")).string());
    else if (pipe.scheme == TransformScheme::light) throw ValidationError("light scheme needs a class_map");
    out = process_panel(raw, pipe, classes);
  }
  if (out.missing().any()) throw ValidationError("panel has missing values; run the cleaning pipeline");
  return reorder(out, get<std::vector<std::string>>(c, "order"));
}

int q_of(const Json& c, const Panel& p) {
  const int q = get<int>(c, "q");
  if (q < 1 || q > p.n()) throw ValidationError("q must lie in [1, n]");
  return q;
}

CandidateSpec fixed_spec(const Json& c) {
  const auto g = get<std::vector<int>>(c, "gamma");
  CandidateSpec s;
  s.gamma = KroneckerIndices(g);
  const auto [dp, ds] = default_orders(s.gamma.kappa());
  s.p = opt_int(c, "p").value_or(dp);
  s.s = opt_int(c, "s").value_or(ds);
  return s;
}

bool wants_selection(const Json& c) { return c.at("gamma").is_string() && c.at("gamma") == "select"; }

std::vector<SelectionRow> run_selection(Context& ctx, const Panel& z) {
  const int q = q_of(ctx.config, z);
  const int r = get<int>(ctx.config, "r");
  SelectOptions so;
  so.em = em_options(ctx.config);
  so.init = init_options(ctx.config);
  so.criterion = criterion(ctx.config);
  so.jobs = get<int>(ctx.config, "jobs");
  ctx.seeds["init"] = so.init.seed;
  auto rows = select_model(z.values, q, r, so);
  ctx.write("selection.csv", selection_csv(rows));
  for (const auto& row : rows)
    if (row.failed) std::cerr << "candidate " << row.spec.to_string() << " failed: " << row.error << "\n";
  if (rows.empty() || rows.front().failed) throw NumericalError("every candidate failed");
  Json chosen;
  chosen["gamma"] = rows.front().spec.gamma.values();
  chosen["p"] = rows.front().spec.p;
  chosen["s"] = rows.front().spec.s;
  chosen["criterion"] = get<std::string>(ctx.config, "criterion");
  chosen["value"] = criterion_value(rows.front(), so.criterion);
  ctx.write("chosen_spec.json", chosen.dump(2) + "\n");
  return rows;
}

CandidateSpec resolve_spec(Context& ctx, const Panel& z) {
  if (wants_selection(ctx.config)) return run_selection(ctx, z).front().spec;
  CandidateSpec s = fixed_spec(ctx.config);
  if (s.gamma.q() != q_of(ctx.config, z)) throw ValidationError("gamma length differs from q");
  return s;
}

// max |k_hat H_hat - D^{-1} k H| over horizons 0..10, in standardized units.
Json recovery_metrics(const EmResult& fit, const LoadedFit& truth, const Vector& sds) {
  constexpr int H = 10;
  const PolyMatrix est = irf_rmfd(fit.model, H) * cholesky_identify(fit.ss.sigma_eps);
  const PolyMatrix tru = irf_rmfd(truth.model, H) * cholesky_identify(truth.ss.sigma_eps);
  if (est.rows() != tru.rows() || est.cols() != tru.cols()) throw ValidationError("truth dimensions differ from the fit");
  double worst = 0.0;
  for (int h = 0; h <= H; ++h)
    worst = std::max(worst, (est[h] - sds.cwiseInverse().asDiagonal() * tru[h]).cwiseAbs().maxCoeff());
  Json j;
  j["irf_max_abs_0_10"] = worst;
  j["sigma_xi_true_standardized"] = (truth.ss.sigma_xi * sds.array().square().inverse()).mean();
  j["sigma_xi_hat"] = fit.ss.sigma_xi;
  return j;
}

int cmd_select(Context& ctx) {
  const Panel z = standardize(load_panel(ctx.config));
  const auto rows = run_selection(ctx, z);
  std::cout << selection_csv(rows);
  return 0;
}

int cmd_estimate(Context& ctx) {
  const Panel panel = load_panel(ctx.config);
  const Panel z = standardize(panel);
  const CandidateSpec spec = resolve_spec(ctx, z);
  InitOptions io = init_options(ctx.config);
  ctx.seeds["init"] = io.seed;
  const EchelonInitResult init = echelon_init(z.values, spec.gamma, spec.s, spec.p, io);
  const EmResult fit = em_estimate(z.values, spec.gamma, spec.s, spec.p, init.init.ss, em_options(ctx.config));
  Json model = fit_to_json(fit);
  model["variables"] = z.mnemonics;
  ctx.write("model.json", model.dump(2) + "\n");
  Json report;
  report["spec"] = spec.to_string();
  report["loglik"] = fit.loglik;
  report["loglik_scaled"] = fit.loglik_scaled();
  report["iterations"] = fit.iterations;
  report["converged"] = fit.converged;
  report["n_params"] = fit.n_params;
  report["stability_guards"] = fit.trace.stability_guards;
  report["init_loglik"] = init.loglik;
  report["init_realized_gamma"] = init.init.realized_gamma ? init.init.realized_gamma->to_string() : "none";
  report["trace"] = fit.trace.loglik;
  if (!ctx.config.at("truth").is_null())
    report["recovery"] = recovery_metrics(fit, fit_from_json(read_json(get<std::string>(ctx.config, "truth"))), z.sds);
  ctx.write("fit_report.json", report.dump(2) + "\n");
  if (!fit.converged) std::cerr << "warning: EM did not converge in " << fit.iterations << " iterations\n";
  std::cout << "loglik/T " << fit.loglik_scaled() << " after " << fit.iterations << " iterations"
            << (fit.converged ? "" : " (not converged)") << "\n";
  return 0;
}

int index_of(const std::vector<std::string>& v, const std::string& name) {
  const auto it = std::find(v.begin(), v.end(), name);
  if (it == v.end()) throw ValidationError("variable '" + name + "' not in the panel");
  return static_cast<int>(it - v.begin());
}

IrfTable table_from(const std::string& label, const Matrix& point, const std::vector<std::string>& vars,
                    const std::vector<int>& tcodes, const std::vector<int>& rows) {
  IrfTable t;
  t.label = label;
  t.point.resize(static_cast<Eigen::Index>(rows.size()), point.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    t.point.row(static_cast<Eigen::Index>(i)) = point.row(rows[i]);
    t.variables.push_back(vars[static_cast<std::size_t>(rows[i])]);
    t.units.push_back(units_for_tcode(tcodes[static_cast<std::size_t>(rows[i])]));
  }
  return t;
}

// Rotation Q making the top q x q block of the impact matrix lower triangular.
Matrix recursive_rotation(const Matrix& impact_top) {
  Eigen::HouseholderQR<Matrix> qr(impact_top.transpose());
  Matrix Q = qr.householderQ();
  const Matrix L = impact_top * Q;
  for (Eigen::Index i = 0; i < L.rows(); ++i)
    if (L(i, i) < 0.0) Q.col(i) *= -1.0;
  return Q;
}

int cmd_irf(Context& ctx) {
  const Json& c = ctx.config;
  const Panel panel = load_panel(c);
  const Panel z = standardize(panel);
  const int horizon = get<int>(c, "horizon");
  if (horizon < 1) throw ValidationError("horizon must be >= 1");
  const int shock = index_of(z.mnemonics, get<std::string>(c, "shock"));
  std::optional<IrfNormalization> norm;
  if (!c.at("normalization").is_null()) norm = IrfNormalization{shock, get<double>(c, "normalization")};

  std::vector<int> rows;
  for (const auto& f : get<std::vector<std::string>>(c, "focal")) rows.push_back(index_of(z.mnemonics, f));
  if (rows.empty())
    for (int i = 0; i < z.n(); ++i) rows.push_back(i);

  StructuralOptions so;
  so.shock = shock;
  so.normalize = norm;
  so.horizon = horizon;
  so.em = em_options(c);
  so.init = init_options(c);
  ctx.seeds["init"] = so.init.seed;

  StructuralFit point;
  CandidateSpec spec;
  if (!c.at("model").is_null()) {
    const Json mj = read_json(get<std::string>(c, "model"));
    if (mj.contains("variables") && mj.at("variables").get<std::vector<std::string>>() != z.mnemonics)
      throw ValidationError("model variables differ from the panel");
    const LoadedFit lf = fit_from_json(mj);
    if (lf.model.n() != z.n()) throw DimensionError("model n differs from the panel");
    spec.gamma = lf.model.gamma;
    spec.p = lf.model.p();
    spec.s = lf.model.s();
    point.fit.model = lf.model;
    point.fit.ss = lf.ss;
    point.fit.loglik = lf.loglik;
    point.fit.iterations = lf.iterations;
    point.fit.converged = lf.converged;
    point.fit.T = z.T();
    point.H = cholesky_identify(lf.ss.sigma_eps);
    StructuralIrf raw = structural_irf(lf.model, point.H, shock, horizon);
    raw.normalization = norm;
    point.irf = finalize_irf(raw, z.sds, panel.tcodes);
  } else {
    spec = resolve_spec(ctx, z);
    point = estimate_structural(panel, spec, so);
  }
  if (shock >= spec.gamma.q())
    throw ValidationError("shock variable must be among the first q variables (use 'order')");

  std::vector<IrfTable> tables;
  IrfTable main = table_from("rmfd", point.irf.responses, z.mnemonics, panel.tcodes, rows);
  const Json& bj = c.at("bootstrap");
  const int draws = get<int>(bj, "draws");
  if (draws > 0) {
    BootstrapOptions bo;
    bo.draws = draws;
    bo.block_len = get<int>(bj, "block_len");
    bo.level = get<double>(bj, "level");
    bo.seed = get<std::uint64_t>(bj, "seed");
    bo.warm_start = get<bool>(bj, "warm_start");
    bo.jobs = get<int>(c, "jobs");
    ctx.seeds["bootstrap"] = bo.seed;
    const BootstrapBands bands = block_bootstrap(panel, spec, so, bo, point);
    main.lower.resize(main.point.rows(), main.point.cols());
    main.upper.resize(main.point.rows(), main.point.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      main.lower.row(static_cast<Eigen::Index>(i)) = bands.lower.row(rows[i]);
      main.upper.row(static_cast<Eigen::Index>(i)) = bands.upper.row(rows[i]);
    }
    std::cerr << "bootstrap: " << bands.draws << " draws, " << bands.failures << " failures\n";
  }
  tables.push_back(main);

  const Json& bm = c.at("benchmarks");
  if (get<bool>(bm, "enabled")) {
    const int q = spec.gamma.q();
    const SdfmFit sd = estimate_sdfm(z.values, get<int>(bm, "r"), get<int>(bm, "m"), q, horizon);
    const Matrix Q = recursive_rotation(sd.irf[0].topRows(q));
    StructuralIrf sraw = structural_irf_from(sd.irf * Q, shock, std::nullopt);
    sraw.normalization = norm;
    tables.push_back(
        table_from("sdfm", finalize_irf(sraw, z.sds, panel.tcodes).responses, z.mnemonics, panel.tcodes, rows));

    auto svars = get<std::vector<std::string>>(bm, "svar_vars");
    if (svars.empty())
      for (int i = 0; i < q; ++i) svars.push_back(z.mnemonics[static_cast<std::size_t>(i)]);
    std::vector<int> cols;
    for (const auto& v : svars) cols.push_back(index_of(z.mnemonics, v));
    const int vshock = index_of(svars, get<std::string>(c, "shock"));
    Matrix Xs(z.T(), static_cast<Eigen::Index>(cols.size()));
    Vector sds(static_cast<Eigen::Index>(cols.size()));
    std::vector<int> tc;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      Xs.col(static_cast<Eigen::Index>(k)) = z.values.col(cols[k]);
      sds(static_cast<Eigen::Index>(k)) = z.sds(cols[k]);
      tc.push_back(panel.tcodes[static_cast<std::size_t>(cols[k])]);
    }
    const SvarFit sv = estimate_svar(Xs, get<int>(bm, "svar_lags"), true, horizon);
    std::optional<IrfNormalization> vnorm;
    if (norm) vnorm = IrfNormalization{vshock, norm->size};
    StructuralIrf vraw = structural_irf_from(sv.irf, vshock, std::nullopt);
    vraw.normalization = vnorm;
    std::vector<int> all(cols.size());
    for (std::size_t k = 0; k < all.size(); ++k) all[k] = static_cast<int>(k);
    tables.push_back(table_from("svar", finalize_irf(vraw, sds, tc).responses, svars, tc, all));
  }

  ctx.write("irf.csv", irf_csv(tables));
  ctx.write("irf.json", irf_json(tables).dump(1) + "\n");
  std::cout << "wrote " << main.point.rows() << " variables x " << main.point.cols() << " horizons\n";
  return 0;
}

int cmd_simulate(Context& ctx) {
  const Json& sj = ctx.config.at("simulate");
  const auto g = get<std::vector<int>>(sj, "gamma");
  const int n = get<int>(sj, "n");
  const KroneckerIndices gamma(g);
  const EchelonPattern pat = echelon_pattern(gamma, n, opt_int(sj, "s"), opt_int(sj, "p"));
  const auto seed = get<std::uint64_t>(sj, "seed");
  ctx.seeds["simulate"] = seed;
  auto rng = stream_rng(seed, 7);
  DgpSpec dgp;
  dgp.model = random_canonical_model(pat, rng, get<double>(sj, "scale"), get<double>(sj, "max_radius"));
  dgp.sigma_eps = Matrix::Identity(gamma.q(), gamma.q());
  dgp.sigma_xi = sigma_xi_for_snr(dgp.model, dgp.sigma_eps, get<double>(sj, "snr"));
  dgp.T = get<int>(sj, "T");
  dgp.burn_in = get<int>(sj, "burn_in");
  dgp.seed = seed;
  const SimResult sim = simulate(dgp);
  ctx.write("simulated.csv", format_fredmd(sim.panel));
  Json truth = model_to_json(dgp.model);
  truth["sigma_eps"] = matrix_to_json(dgp.sigma_eps);
  truth["sigma_xi"] = dgp.sigma_xi;
  truth["variables"] = sim.panel.mnemonics;
  ctx.write("truth.json", truth.dump(2) + "\n");
  std::cout << "simulated " << dgp.T << " x " << n << " panel, sigma_xi " << dgp.sigma_xi << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic factor models in reversed-echelon RMFD form"};
  app.require_subcommand(1);
  std::string config_path;
  std::string data, output, gamma, shock, model, truth;
  std::optional<int> jobs, q, r, max_iter, draws, horizon;
  std::optional<std::uint64_t> seed;
  bool processed = false;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--data", data, "FRED-MD style CSV (relative paths also tried under $" + std::string(kDataDirEnv) + ")");
  app.add_option("--output", output, "output directory");
  app.add_option("--jobs", jobs, "worker threads");
  app.add_option("--gamma", gamma, "comma separated Kronecker indices or 'select'");
  app.add_option("--q", q, "number of dynamic factors");
  app.add_option("--r", r, "static factor dimension for the selection menu");
  app.add_option("--max-iter", max_iter, "EM iteration cap");
  app.add_option("--seed", seed, "seed for initialization, bootstrap and simulation");
  app.add_option("--draws", draws, "bootstrap draws");
  app.add_option("--shock", shock, "shock variable");
  app.add_option("--horizon", horizon, "IRF horizon");
  app.add_option("--model", model, "model JSON from 'estimate'");
  app.add_option("--truth", truth, "truth JSON from 'simulate'");
  app.add_flag("--processed", processed, "data is already transformed and complete");
  auto* sel = app.add_subcommand("select", "estimate the candidate menu and rank it");
  auto* est = app.add_subcommand("estimate", "estimate one specification");
  auto* irf = app.add_subcommand("irf", "structural impulse responses");
  auto* simc = app.add_subcommand("simulate", "draw a synthetic panel");
  for (auto* s : {sel, est, irf, simc}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    Context ctx;
    ctx.config = default_config();
    if (!config_path.empty()) merge(ctx.config, read_json(config_path));
    Json& c = ctx.config;
    if (!data.empty()) c["data"] = data;
    if (!output.empty()) c["output"] = output;
    if (jobs) c["jobs"] = *jobs;
    if (q) c["q"] = *q;
    if (r) c["r"] = *r;
    if (max_iter) c["em"]["max_iter"] = *max_iter;
    if (draws) c["bootstrap"]["draws"] = *draws;
    if (!shock.empty()) c["shock"] = shock;
    if (horizon) c["horizon"] = *horizon;
    if (!model.empty()) c["model"] = model;
    if (!truth.empty()) c["truth"] = truth;
    if (processed) c["processed"] = true;
    if (seed) {
      c["init"]["seed"] = *seed;
      c["bootstrap"]["seed"] = *seed;
      c["simulate"]["seed"] = *seed;
    }
    if (!gamma.empty()) {
      if (gamma == "select") {
        c["gamma"] = "select";
      } else {
        std::vector<int> g;
        std::stringstream ss(gamma);
        for (std::string tok; std::getline(ss, tok, ',');) {
          try {
            g.push_back(std::stoi(tok));
          } catch (const std::exception&) {
            throw ValidationError("bad --gamma entry '" + tok + "'");
          }
        }
        c["gamma"] = g;
      }
    }
    if (get<int>(c, "jobs") < 1) throw ValidationError("jobs must be >= 1");
    ctx.out = get<std::string>(c, "output");

    int rc = 0;
    if (*sel) ctx.command = "select", rc = cmd_select(ctx);
    else if (*est) ctx.command = "estimate", rc = cmd_estimate(ctx);
    else if (*irf) ctx.command = "irf", rc = cmd_irf(ctx);
    else ctx.command = "simulate", rc = cmd_simulate(ctx);
    ctx.finish();
    return rc;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
