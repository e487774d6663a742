// Batch front end: fit / simulate / cv / aic-table driven by a flat
// key = value config file. Logs go to stderr, the summary table to stdout;
// all artifacts are written atomically. Exit codes: 0 ok, 2 config error,
// 3 data error, 4 non-convergence.

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "phsmm/phsmm.hpp"

namespace {

using nlohmann::json;
using namespace phsmm;

constexpr const char* kVersion = "0.1.0";

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

std::string fmt6(double v) {
    std::ostringstream out;
    out.precision(6);
    out << std::fixed << v;
    return out.str();
}

// ---- config schema -------------------------------------------------------

struct DefaultEntry {
    const char* key;
    const char* value;
    const char* note;
};

const std::vector<DefaultEntry>& default_entries() {
    static const std::vector<DefaultEntry> defaults = {
        {"model.states", "2", "number of hidden states N"},
        {"model.dwell_start", "5", "unstructured dwell length R per state (single value or N values)"},
        {"model.families", "normal", "emission family per channel: zigamma | vonmises | normal | poisson"},
        {"penalty.lambda", "0", "smoothing parameter per state (single value or N values)"},
        {"penalty.order", "2", "difference order m"},
        {"fit.starts", "10", "number of jittered starts"},
        {"fit.max_iter", "300", "BFGS iteration cap per start"},
        {"fit.rel_tol", "1e-8", "relative objective-change tolerance"},
        {"fit.grad_tol", "1e-4", "gradient sup-norm tolerance"},
        {"fit.jitter", "0.2", "working-scale jitter sd for starts > 0"},
        {"fit.seed", "1", "optimizer seed"},
        {"fit.convention", "gamma-first", "likelihood convention: gamma-first | delta-first"},
        {"fit.compute_df", "1", "compute effective degrees of freedom after the fit"},
        {"dwell.horizon", "30", "last dwell time r in the exported PMF table"},
        {"residuals.channel", "all", "channel index for pseudo-residuals, or 'all'"},
        {"residuals.seed", "1", "seed for the randomized PIT"},
        {"sim.length", "1000", "number of time steps to simulate"},
        {"sim.seed", "1", "simulation seed"},
        {"cv.folds", "10", "number of contiguous CV blocks"},
        {"cv.grid", "0, 1, 10, 100, 1000", "candidate lambdas (shared, or cv.grid.state<i>)"},
        {"cv.start_index", "0", "walk start, 0-based index into the grid (single or N values)"},
        {"cv.max_moves", "20", "neighbourhood-walk move cap"},
        {"cv.starts", "1", "starts per fold fit"},
        {"data.input", "data.csv", "input dataset (CSV, header row, NA = missing)"},
        {"out.prefix", "phsmm", "output path prefix for all artifacts"},
    };
    return defaults;
}

void print_defaults() {
    std::cout << "# all configuration keys and their defaults\n";
    for (const auto& d : default_entries())
        std::cout << d.key << " = " << d.value << "  # " << d.note << "\n";
    std::cout << "# simulate additionally needs true parameters:\n"
              << "#   dwell.state1 = 0.1, 0.3, 0.3        (unstructured start probabilities)\n"
              << "#   omega.row1 = 0, 0.5, 0.5            (conditional switch row; N > 2 only)\n"
              << "#   emission.state1.ch1 = 0.02, 100, 80 (family-specific values, see below)\n"
              << "#     zigamma:  zero_mass, mean, sd\n"
              << "#     vonmises: location, concentration\n"
              << "#     normal:   mean, sd\n"
              << "#     poisson:  rate\n";
}

// ---- model construction --------------------------------------------------

std::vector<double> per_state(const KeyValueConfig& cfg, const std::string& key, std::size_t N,
                              double fallback) {
    std::vector<double> v =
        cfg.has(key) ? cfg.get_double_list(key) : std::vector<double>{fallback};
    if (v.size() == 1) v.assign(N, v[0]);
    if (v.size() != N)
        throw ConfigError("config key " + key + ": expected 1 or " + std::to_string(N) +
                          " values, got " + std::to_string(v.size()));
    return v;
}

EmissionParams family_skeleton(const std::string& name) {
    if (name == "zigamma") return ZeroInflatedGamma{0.1, 1.0, 1.0};
    if (name == "vonmises") return VonMises{0.0, 1.0};
    if (name == "normal") return Normal{0.0, 1.0};
    if (name == "poisson") return Poisson{1.0};
    throw ConfigError("unknown emission family '" + name + "'");
}

EmissionParams family_values(const EmissionParams& skel, const std::vector<double>& v,
                             const std::string& key) {
    auto need = [&](std::size_t n) {
        if (v.size() != n)
            throw ConfigError("config key " + key + ": expected " + std::to_string(n) +
                              " values, got " + std::to_string(v.size()));
    };
    if (std::holds_alternative<ZeroInflatedGamma>(skel)) {
        need(3);
        return ZeroInflatedGamma{v[0], v[1], v[2]};
    }
    if (std::holds_alternative<VonMises>(skel)) {
        need(2);
        return VonMises{v[0], v[1]};
    }
    if (std::holds_alternative<Normal>(skel)) {
        need(2);
        return Normal{v[0], v[1]};
    }
    need(1);
    return Poisson{v[0]};
}

std::string family_name(const EmissionParams& p) {
    if (std::holds_alternative<ZeroInflatedGamma>(p)) return "zigamma";
    if (std::holds_alternative<VonMises>(p)) return "vonmises";
    if (std::holds_alternative<Normal>(p)) return "normal";
    return "poisson";
}

std::vector<double> natural_values(const EmissionParams& p) {
    if (const auto* z = std::get_if<ZeroInflatedGamma>(&p)) return {z->zero_mass, z->mean, z->sd};
    if (const auto* v = std::get_if<VonMises>(&p)) return {v->location, v->concentration};
    if (const auto* n = std::get_if<Normal>(&p)) return {n->mean, n->sd};
    return {std::get<Poisson>(p).rate};
}

// Skeleton for fitting: families and sizes from the config, placeholder
// values everywhere else (the optimizer supplies its own starting point).
HsmmModel build_skeleton(const KeyValueConfig& cfg) {
    const auto N = static_cast<std::size_t>(cfg.get_int("model.states", 2));
    if (N < 2) throw ConfigError("config key model.states: need at least 2 states");
    const auto Rs = per_state(cfg, "model.dwell_start", N, 5.0);

    HsmmModel m;
    for (std::size_t i = 0; i < N; ++i) {
        const auto R = static_cast<std::size_t>(Rs[i]);
        if (R < 2 || Rs[i] != static_cast<double>(R))
            throw ConfigError("config key model.dwell_start: entries must be integers >= 2");
        m.dwell.push_back(geometric_dwell(0.5, R));
    }
    m.omega = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j)
            if (i != j)
                m.omega(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    N == 2 ? 1.0 : 1.0 / static_cast<double>(N - 1);

    std::vector<std::string> fams = {"normal"};
    if (cfg.has("model.families")) fams = cfg.get_string_list("model.families");
    m.emissions.resize(N);
    for (std::size_t i = 0; i < N; ++i)
        for (const auto& f : fams) m.emissions[i].push_back(family_skeleton(f));
    return m;
}

// Fully specified model for simulation; every parameter block must be given.
HsmmModel build_full_model(const KeyValueConfig& cfg) {
    HsmmModel m = build_skeleton(cfg);
    const std::size_t N = m.n_states();
    for (std::size_t i = 0; i < N; ++i) {
        const std::string key = "dwell.state" + std::to_string(i + 1);
        m.dwell[i] = DwellTimeSpec(cfg.get_double_list(key));
        for (std::size_t c = 0; c < m.n_channels(); ++c) {
            const std::string ekey =
                "emission.state" + std::to_string(i + 1) + ".ch" + std::to_string(c + 1);
            m.emissions[i][c] = family_values(m.emissions[i][c], cfg.get_double_list(ekey), ekey);
        }
        if (N > 2) {
            const std::string okey = "omega.row" + std::to_string(i + 1);
            const auto row = cfg.get_double_list(okey);
            if (row.size() != N)
                throw ConfigError("config key " + okey + ": expected " + std::to_string(N) +
                                  " values");
            for (std::size_t j = 0; j < N; ++j)
                m.omega(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
        }
    }
    m.validate();
    return m;
}

FitOptions build_fit_options(const KeyValueConfig& cfg, long threads) {
    FitOptions opt;
    opt.n_starts = static_cast<std::size_t>(cfg.get_int("fit.starts", 10));
    opt.max_iter = static_cast<std::size_t>(cfg.get_int("fit.max_iter", 300));
    opt.rel_tol = cfg.get_double("fit.rel_tol", 1e-8);
    opt.grad_tol = cfg.get_double("fit.grad_tol", 1e-4);
    opt.jitter = cfg.get_double("fit.jitter", 0.2);
    opt.seed = static_cast<std::uint64_t>(cfg.get_int("fit.seed", 1));
    opt.threads = threads > 0 ? static_cast<std::size_t>(threads) : 1;
    const std::string conv = cfg.get_string("fit.convention", "gamma-first");
    if (conv == "gamma-first")
        opt.convention = LikelihoodConvention::GammaFirst;
    else if (conv == "delta-first")
        opt.convention = LikelihoodConvention::DeltaFirst;
    else
        throw ConfigError("config key fit.convention: expected gamma-first or delta-first");
    return opt;
}

PenaltyConfig build_penalty(const KeyValueConfig& cfg, std::size_t N) {
    return PenaltyConfig(per_state(cfg, "penalty.lambda", N, 0.0),
                         static_cast<std::size_t>(cfg.get_int("penalty.order", 2)));
}

// ---- artifact writers ----------------------------------------------------

std::string parameters_text(const FitResult& res) {
    std::ostringstream out;
    const HsmmModel& m = res.model_hat;
    out << "# fitted parameters, natural scale\n";
    for (std::size_t i = 0; i < m.n_states(); ++i) {
        out << "dwell.state" << i + 1 << " =";
        for (double p : m.dwell[i].unstructured()) out << " " << fmt(p);
        out << "\ndwell.state" << i + 1 << ".tail_ratio = " << fmt(m.dwell[i].tail_ratio())
            << "\n";
    }
    for (std::size_t i = 0; i < m.n_states(); ++i) {
        out << "omega.row" << i + 1 << " =";
        for (std::size_t j = 0; j < m.n_states(); ++j)
            out << " "
                << fmt(m.omega(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        out << "\n";
    }
    for (std::size_t i = 0; i < m.n_states(); ++i)
        for (std::size_t c = 0; c < m.n_channels(); ++c) {
            out << "emission.state" << i + 1 << ".ch" << c + 1 << " ("
                << family_name(m.emissions[i][c]) << ") =";
            for (double v : natural_values(m.emissions[i][c])) out << " " << fmt(v);
            out << "\n";
        }
    out << "# working scale (packed optimizer vector)\n";
    out << "theta =";
    for (Eigen::Index k = 0; k < res.theta_hat.size(); ++k) out << " " << fmt(res.theta_hat(k));
    out << "\n";
    return out.str();
}

std::string dwell_table_csv(const HsmmModel& m, std::size_t horizon) {
    std::ostringstream out;
    out << "state,r,probability\n";
    for (std::size_t i = 0; i < m.n_states(); ++i)
        for (std::size_t r = 1; r <= horizon; ++r)
            out << i + 1 << "," << r << "," << fmt(dwell_pmf(m.dwell[i], r)) << "\n";
    return out.str();
}

std::string states_csv(const HsmmModel& m, const Dataset& data, LikelihoodConvention conv) {
    const ExpandedHmm hmm = expand(m);
    const auto path = viterbi(hmm, m.emissions, data, conv);
    const Eigen::MatrixXd probs = state_probs(hmm, m.emissions, data, conv);
    std::ostringstream out;
    out << "t,viterbi";
    for (std::size_t i = 0; i < m.n_states(); ++i) out << ",p_state" << i + 1;
    out << "\n";
    for (std::size_t t = 0; t < data.length(); ++t) {
        out << t + 1 << "," << path[t] + 1;
        for (std::size_t i = 0; i < m.n_states(); ++i)
            out << ","
                << fmt(probs(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)));
        out << "\n";
    }
    return out.str();
}

std::string residuals_csv(const HsmmModel& m, const Dataset& data, const KeyValueConfig& cfg,
                          LikelihoodConvention conv) {
    const ExpandedHmm hmm = expand(m);
    const auto seed = static_cast<std::uint64_t>(cfg.get_int("residuals.seed", 1));
    const std::string which = cfg.get_string("residuals.channel", "all");

    std::vector<std::size_t> channels;
    for (std::size_t c = 0; c < data.n_channels(); ++c) {
        if (which != "all" && std::to_string(c) != which) continue;
        if (!has_cdf(m.emissions[0][c])) {
            std::cerr << "phsmm: channel " << data.channel_names[c]
                      << " has no usable CDF, skipping residuals\n";
            continue;
        }
        channels.push_back(c);
    }

    std::ostringstream out;
    out << "t";
    for (std::size_t c : channels) out << ",resid_" << data.channel_names[c];
    out << "\n";
    std::vector<std::vector<std::optional<double>>> res;
    for (std::size_t c : channels)
        res.push_back(pseudo_residuals(hmm, m.emissions, data, c, seed + c, conv));
    for (std::size_t t = 0; t < data.length(); ++t) {
        out << t + 1;
        for (std::size_t k = 0; k < channels.size(); ++k)
            out << "," << (res[k][t] ? fmt(*res[k][t]) : "NA");
        out << "\n";
    }
    return out.str();
}

json config_json(const KeyValueConfig& cfg) {
    json j = json::object();
    for (const auto& [k, v] : cfg.all()) j[k] = v;
    return j;
}

// ---- commands ------------------------------------------------------------

int cmd_fit(const std::string& config_path, long threads) {
    const KeyValueConfig cfg = KeyValueConfig::from_file(config_path);
    const Dataset data = read_dataset_csv(cfg.get_string("data.input"));
    for (std::size_t c = 0; c < data.n_channels(); ++c) {
        bool any = false;
        for (const auto& rec : data.records) any = any || rec[c].has_value();
        if (!any)
            std::cerr << "phsmm: channel " << data.channel_names[c]
                      << " is entirely missing; it contributes factor 1\n";
    }

    const HsmmModel skeleton = build_skeleton(cfg);
    if (data.n_channels() != skeleton.n_channels())
        throw DataError("data has " + std::to_string(data.n_channels()) +
                        " channels but model.families lists " +
                        std::to_string(skeleton.n_channels()));
    const PenaltyConfig penalty = build_penalty(cfg, skeleton.n_states());
    const FitOptions opt = build_fit_options(cfg, threads);
    const std::string prefix = cfg.get_string("out.prefix", "phsmm");

    std::cerr << "phsmm: fitting " << skeleton.n_states() << "-state model, "
              << data.length() << " time steps, " << opt.n_starts << " starts\n";
    const FitResult res = fit(data, skeleton, penalty, opt);

    double df = static_cast<double>(res.n_params);
    bool df_computed = false;
    if (cfg.get_int("fit.compute_df", 1) != 0) {
        PackedObjective obj(skeleton, penalty, data, opt.convention, opt.estimate_entry);
        const EffectiveDf ed = effective_df(obj, res.theta_hat);
        df = ed.df;
        df_computed = true;
    }

    const auto horizon = static_cast<std::size_t>(cfg.get_int("dwell.horizon", 30));
    atomic_write(prefix + "_parameters.txt", parameters_text(res));
    atomic_write(prefix + "_dwell.csv", dwell_table_csv(res.model_hat, horizon));
    atomic_write(prefix + "_states.csv", states_csv(res.model_hat, data, opt.convention));
    atomic_write(prefix + "_residuals.csv",
                 residuals_csv(res.model_hat, data, cfg, opt.convention));

    json meta;
    meta["version"] = kVersion;
    meta["command"] = "fit";
    meta["config"] = config_json(cfg);
    meta["loglik"] = res.loglik;
    meta["penalised_loglik"] = res.penalised_loglik;
    meta["n_params"] = res.n_params;
    meta["effective_df"] = df;
    meta["effective_df_computed"] = df_computed;
    meta["aic"] = aic(res.loglik, df);
    meta["converged"] = res.converged;
    meta["n_evals"] = res.n_evals;
    meta["seed"] = opt.seed;
    meta["rel_tol"] = opt.rel_tol;
    meta["grad_tol"] = opt.grad_tol;
    atomic_write(prefix + "_run.json", meta.dump(2) + "\n");

    std::cout << "quantity,value\n"
              << "loglik," << fmt6(res.loglik) << "\n"
              << "penalised_loglik," << fmt6(res.penalised_loglik) << "\n"
              << "n_params," << res.n_params << "\n"
              << "effective_df," << fmt6(df) << "\n"
              << "aic," << fmt6(aic(res.loglik, df)) << "\n"
              << "converged," << (res.converged ? "yes" : "no") << "\n";

    if (!res.converged) {
        std::cerr << "phsmm: optimizer did not converge\n";
        return 4;
    }
    return 0;
}

int cmd_simulate(const std::string& config_path) {
    const KeyValueConfig cfg = KeyValueConfig::from_file(config_path);
    const HsmmModel model = build_full_model(cfg);
    const auto T = static_cast<std::size_t>(cfg.get_int("sim.length", 1000));
    const auto seed = static_cast<std::uint64_t>(cfg.get_int("sim.seed", 1));
    const std::string prefix = cfg.get_string("out.prefix", "phsmm");

    std::vector<std::string> names;
    if (cfg.has("sim.channel_names")) names = cfg.get_string_list("sim.channel_names");
    const SimOutput sim = simulate(model, T, seed, names);

    atomic_write(prefix + "_data.csv", dataset_to_csv(sim.observations));
    std::ostringstream truth;
    truth << "t,state\n";
    for (std::size_t t = 0; t < T; ++t) truth << t + 1 << "," << sim.states[t] + 1 << "\n";
    atomic_write(prefix + "_truth.csv", truth.str());

    std::cout << "quantity,value\n"
              << "length," << T << "\n"
              << "seed," << seed << "\n"
              << "sojourns," << sim.sojourns.size() << "\n";
    return 0;
}

int cmd_cv(const std::string& config_path, long threads) {
    const KeyValueConfig cfg = KeyValueConfig::from_file(config_path);
    const Dataset data = read_dataset_csv(cfg.get_string("data.input"));
    const HsmmModel skeleton = build_skeleton(cfg);
    const std::size_t N = skeleton.n_states();
    const std::string prefix = cfg.get_string("out.prefix", "phsmm");

    CvPlan plan;
    plan.n_folds = static_cast<std::size_t>(cfg.get_int("cv.folds", 10));
    plan.max_moves = static_cast<std::size_t>(cfg.get_int("cv.max_moves", 20));
    for (std::size_t i = 0; i < N; ++i) {
        const std::string key = "cv.grid.state" + std::to_string(i + 1);
        plan.grid.push_back(cfg.has(key) ? cfg.get_double_list(key)
                                         : cfg.get_double_list("cv.grid"));
    }
    const auto starts = per_state(cfg, "cv.start_index", N, 0.0);
    for (double s : starts) plan.start_index.push_back(static_cast<std::size_t>(s));
    plan.fold_options = build_fit_options(cfg, threads);
    plan.fold_options.n_starts = static_cast<std::size_t>(cfg.get_int("cv.starts", 1));

    const auto order = static_cast<std::size_t>(cfg.get_int("penalty.order", 2));
    std::cerr << "phsmm: cross-validating over " << plan.grid[0].size()
              << "-point grids, " << plan.n_folds << " folds\n";
    const SelectionReport rep = cross_validate(data, skeleton, order, plan);

    std::ostringstream traj;
    traj << "move";
    for (std::size_t i = 0; i < N; ++i) traj << ",lambda_state" << i + 1;
    traj << "\n";
    for (std::size_t k = 0; k < rep.trajectory.size(); ++k) {
        traj << k;
        for (double l : rep.trajectory[k]) traj << "," << fmt(l);
        traj << "\n";
    }
    atomic_write(prefix + "_cv_trajectory.csv", traj.str());

    std::ostringstream ev;
    ev << "candidate";
    for (std::size_t i = 0; i < N; ++i) ev << ",lambda_state" << i + 1;
    ev << ",mean_valid_loglik,valid\n";
    for (std::size_t k = 0; k < rep.evaluated.size(); ++k) {
        ev << k;
        for (double l : rep.evaluated[k].lambda) ev << "," << fmt(l);
        ev << "," << (rep.evaluated[k].valid ? fmt(rep.evaluated[k].score) : "NA") << ","
           << (rep.evaluated[k].valid ? "yes" : "no") << "\n";
    }
    atomic_write(prefix + "_cv_candidates.csv", ev.str());

    std::ostringstream chosen;
    chosen << "penalty.lambda =";
    for (std::size_t i = 0; i < N; ++i)
        chosen << (i ? "," : "") << " " << fmt(rep.chosen_lambda[i]);
    chosen << "\n";
    atomic_write(prefix + "_cv_chosen.txt", chosen.str());

    std::cout << "quantity,value\n";
    for (std::size_t i = 0; i < N; ++i)
        std::cout << "chosen_lambda_state" << i + 1 << "," << fmt(rep.chosen_lambda[i]) << "\n";
    std::cout << "mean_valid_loglik," << fmt6(rep.chosen_score) << "\n"
              << "candidates_evaluated," << rep.evaluated.size() << "\n";
    return 0;
}

int cmd_aic_table(const std::string& input_path, const std::string& output_path) {
    std::ifstream in(input_path);
    if (!in) throw DataError("cannot open input: " + input_path);
    std::string line;
    std::size_t lineno = 0;
    std::vector<AicRow> rows;
    if (!std::getline(in, line)) throw DataError(input_path + ": empty file");
    ++lineno;  // header: name,loglik,df
    while (std::getline(in, line)) {
        ++lineno;
        if (phsmm::detail::trim(line).empty()) continue;
        const auto fields = phsmm::detail::split(line, ',');
        if (fields.size() != 3)
            throw DataError(input_path + ":" + std::to_string(lineno) +
                            ": expected name,loglik,df");
        try {
            rows.push_back({fields[0], std::stod(fields[1]), std::stod(fields[2])});
        } catch (const std::exception&) {
            throw DataError(input_path + ":" + std::to_string(lineno) + ": unparseable number");
        }
    }
    if (rows.empty()) throw DataError(input_path + ": no model rows");

    const auto table = candidate_table(rows);
    std::ostringstream out;
    out << "model,loglik,df,aic,delta_aic\n";
    for (const auto& r : table)
        out << r.name << "," << fmt(r.loglik) << "," << fmt(r.df) << "," << fmt(r.aic_value)
            << "," << fmt(r.delta_aic) << "\n";
    atomic_write(output_path, out.str());
    std::cout << out.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"penalised maximum likelihood estimation for hidden semi-Markov models"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    long threads = 1;
    app.add_option("--threads", threads, "parallel starts / folds")->capture_default_str();

    std::string fit_config, sim_config, cv_config, aic_in, aic_out;
    auto* fit_cmd = app.add_subcommand("fit", "fit a model to a dataset");
    fit_cmd->add_option("config", fit_config, "configuration file")->required();
    auto* sim_cmd = app.add_subcommand("simulate", "simulate a dataset from a full model");
    sim_cmd->add_option("config", sim_config, "configuration file")->required();
    auto* cv_cmd = app.add_subcommand("cv", "choose smoothing parameters by cross-validation");
    cv_cmd->add_option("config", cv_config, "configuration file")->required();
    auto* aic_cmd = app.add_subcommand("aic-table", "rank models by AIC from (name,loglik,df) rows");
    aic_cmd->add_option("input", aic_in, "CSV with columns name,loglik,df")->required();
    aic_cmd->add_option("output", aic_out, "output CSV path")->required();
    auto* config_cmd = app.add_subcommand("config", "configuration helpers");
    bool show_defaults = false;
    config_cmd->add_flag("--defaults", show_defaults, "print all keys with defaults");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (fit_cmd->parsed()) return cmd_fit(fit_config, threads);
        if (sim_cmd->parsed()) return cmd_simulate(sim_config);
        if (cv_cmd->parsed()) return cmd_cv(cv_config, threads);
        if (aic_cmd->parsed()) return cmd_aic_table(aic_in, aic_out);
        if (config_cmd->parsed()) {
            if (show_defaults) {
                print_defaults();
                return 0;
            }
            std::cerr << "phsmm: config requires --defaults\n";
            return 2;
        }
    } catch (const ConfigError& e) {
        std::cerr << "phsmm: config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "phsmm: data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "phsmm: error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
