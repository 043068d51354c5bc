#include "fluctsim/experiment.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "fluctsim/conditioning.hpp"
#include "fluctsim/covariance.hpp"
#include "fluctsim/dynamics.hpp"
#include "fluctsim/generator.hpp"
#include "fluctsim/io.hpp"
#include "fluctsim/ou.hpp"
#include "fluctsim/parallel.hpp"
#include "fluctsim/rng.hpp"

namespace fluctsim {

namespace {

using nlohmann::json;

[[noreturn]] void bad_field(const std::string& path, const std::string& what) {
    throw std::invalid_argument("config: field '" + path + "': " + what);
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) bad_field(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
    }
}

std::string join_path(const std::string& path, const char* key) {
    return path.empty() ? key : path + "." + key;
}

template <class T>
T get_field(const json& j, const std::string& path, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const std::exception& e) {
        bad_field(join_path(path, key), e.what());
    }
}

std::vector<double> get_times(const json& j, const std::string& path, const char* key,
                              std::vector<double> fallback) {
    if (!j.contains(key)) return fallback;
    std::vector<double> out;
    try {
        out = j.at(key).get<std::vector<double>>();
    } catch (const std::exception& e) {
        bad_field(join_path(path, key), e.what());
    }
    return out;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
    check_keys(j, "", {"domain", "sampler", "t_samples", "test_functions", "ensemble", "analyses",
                       "galerkin", "ou", "clusters", "output_dir", "workers"});

    ExperimentConfig cfg;
    cfg.raw_text = json_text;

    if (!j.contains("domain")) bad_field("domain", "required");
    {
        const json& jd = j.at("domain");
        check_keys(jd, "domain", {"d", "eps"});
        try {
            cfg.domain = DomainParams(jd.at("d").get<int>(), jd.at("eps").get<double>());
        } catch (const std::exception& e) {
            bad_field("domain", e.what());
        }
    }

    if (j.contains("sampler")) {
        const json& js = j.at("sampler");
        check_keys(js, "sampler", {"mode", "max_attempts", "burn_in_sweeps"});
        std::string mode = get_field<std::string>(js, "sampler", "mode", "exact_rejection");
        if (mode == "exact_rejection")
            cfg.sampler.mode = SamplerConfig::exact_rejection;
        else if (mode == "birth_death")
            cfg.sampler.mode = SamplerConfig::birth_death;
        else
            bad_field("sampler.mode", "expected 'exact_rejection' or 'birth_death', got '" + mode +
                                          "'");
        cfg.sampler.max_attempts = get_field<long>(js, "sampler", "max_attempts", 2000L);
        cfg.sampler.burn_in_sweeps = get_field<long>(js, "sampler", "burn_in_sweeps", -1L);
        validate_sampler_config(cfg.sampler, cfg.domain);
    }

    cfg.t_samples = get_times(j, "", "t_samples", {0.0});
    for (std::size_t i = 0; i < cfg.t_samples.size(); ++i) {
        if (cfg.t_samples[i] < 0) bad_field("t_samples", "times must be nonnegative");
        if (i > 0 && !(cfg.t_samples[i] > cfg.t_samples[i - 1]))
            bad_field("t_samples", "times must increase strictly");
    }

    if (j.contains("test_functions")) {
        if (!j.at("test_functions").is_array()) bad_field("test_functions", "expected an array");
        for (const auto& e : j.at("test_functions")) {
            try {
                cfg.test_functions.push_back(test_function_from_json(e.dump()));
            } catch (const std::exception& ex) {
                bad_field("test_functions[" + std::to_string(cfg.test_functions.size()) + "]",
                          ex.what());
            }
        }
    }

    if (j.contains("ensemble")) {
        const json& je = j.at("ensemble");
        check_keys(je, "ensemble", {"n_runs", "base_seed"});
        cfg.n_runs = get_field<long>(je, "ensemble", "n_runs", 1L);
        cfg.base_seed = get_field<std::uint64_t>(je, "ensemble", "base_seed", 1ull);
    }
    if (cfg.n_runs < 1) bad_field("ensemble.n_runs", "must be at least 1");

    if (j.contains("analyses")) {
        const json& ja = j.at("analyses");
        check_keys(ja, "analyses", {"covariance", "wick", "fd_check", "ou", "clusters", "balance"});
        cfg.analyses.covariance = get_field<bool>(ja, "analyses", "covariance", false);
        cfg.analyses.wick = get_field<bool>(ja, "analyses", "wick", false);
        cfg.analyses.fd_check = get_field<bool>(ja, "analyses", "fd_check", false);
        cfg.analyses.ou = get_field<bool>(ja, "analyses", "ou", false);
        cfg.analyses.clusters = get_field<bool>(ja, "analyses", "clusters", false);
        cfg.analyses.balance = get_field<bool>(ja, "analyses", "balance", false);
    }

    if (j.contains("galerkin")) {
        const json& jg = j.at("galerkin");
        check_keys(jg, "galerkin", {"fourier_cutoff", "hermite_cutoff", "n_mc"});
        cfg.galerkin.fourier_cutoff = get_field<int>(jg, "galerkin", "fourier_cutoff", 1);
        cfg.galerkin.hermite_cutoff = get_field<int>(jg, "galerkin", "hermite_cutoff", 2);
        cfg.galerkin.n_mc = get_field<long long>(jg, "galerkin", "n_mc", 1000000LL);
    }

    if (j.contains("ou")) {
        const json& jo = j.at("ou");
        check_keys(jo, "ou", {"t_end", "n_paths", "record_dt", "lag_times"});
        cfg.ou.t_end = get_field<double>(jo, "ou", "t_end", 32.0);
        cfg.ou.n_paths = get_field<int>(jo, "ou", "n_paths", 64);
        cfg.ou.record_dt = get_field<double>(jo, "ou", "record_dt", 0.25);
        cfg.ou.lag_times = get_times(jo, "ou", "lag_times", cfg.ou.lag_times);
    }

    if (j.contains("clusters")) {
        const json& jc = j.at("clusters");
        check_keys(jc, "clusters", {"eps_values", "thetas", "k_max", "r_max", "tau", "horizon",
                                    "radius_scale", "strict", "n_runs"});
        cfg.clusters.eps_values = get_times(jc, "clusters", "eps_values", {});
        cfg.clusters.thetas = get_times(jc, "clusters", "thetas", cfg.clusters.thetas);
        cfg.clusters.k_max = get_field<int>(jc, "clusters", "k_max", 1);
        cfg.clusters.r_max = get_field<int>(jc, "clusters", "r_max", 1);
        cfg.clusters.tau = get_field<double>(jc, "clusters", "tau", 0.125);
        cfg.clusters.horizon = get_field<double>(jc, "clusters", "horizon", 1.0);
        cfg.clusters.radius_scale = get_field<double>(jc, "clusters", "radius_scale", 1.0);
        cfg.clusters.strict = get_field<bool>(jc, "clusters", "strict", false);
        cfg.clusters.n_runs = get_field<int>(jc, "clusters", "n_runs", 1000);
    }
    if (cfg.clusters.eps_values.empty()) cfg.clusters.eps_values = {cfg.domain.eps};

    cfg.output_dir = get_field<std::string>(j, "", "output_dir", cfg.output_dir);
    cfg.workers = get_field<int>(j, "", "workers", 0);
    return cfg;
}

MomentData collect_ensemble(const ExperimentConfig& cfg, std::string* run0_snapshots) {
    const int n_fns = int(cfg.test_functions.size());
    const int n_times = int(cfg.t_samples.size());
    MomentData data;
    data.mu_eps = cfg.domain.mu_eps;
    for (int ti = 0; ti < n_times; ++ti)
        for (int fi = 0; fi < n_fns; ++fi) {
            data.slot_ids.push_back(cfg.test_functions[fi].id());
            data.slot_times.push_back(cfg.t_samples[ti]);
        }
    data.raw.assign(std::size_t(cfg.n_runs), std::vector<double>(std::size_t(n_fns) * n_times));

    const int n_shards = int(std::min<long>(64, cfg.n_runs));
    std::vector<std::string> snaps(n_shards), errors(n_shards);
    parallel_for_shards(n_shards, resolve_workers(cfg.workers), [&](int s) {
        try {
            long r0 = cfg.n_runs * long(s) / n_shards;
            long r1 = cfg.n_runs * long(s + 1) / n_shards;
            for (long r = r0; r < r1; ++r) {
                auto rng = make_rng(cfg.base_seed, {tag_sampler, std::uint64_t(r)});
                SystemState st = sample_configuration(cfg.domain, cfg.sampler, rng);
                std::ostringstream snap;
                for (int ti = 0; ti < n_times; ++ti) {
                    double span = cfg.t_samples[ti] - st.time;
                    if (span > 0) advance(st, span);
                    for (int fi = 0; fi < n_fns; ++fi)
                        data.raw[std::size_t(r)][std::size_t(ti) * n_fns + fi] =
                            empirical_field(st, cfg.test_functions[fi]);
                    if (r == 0 && run0_snapshots) write_snapshot(snap, st);
                }
                if (r == 0 && run0_snapshots) snaps[s] = snap.str();
            }
        } catch (const std::exception& e) {
            errors[s] = e.what();
        }
    });
    for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error("ensemble: " + e);
    if (run0_snapshots)
        for (auto& s : snaps) run0_snapshots->append(s);
    return data;
}

namespace {

std::string fields_jsonl(const ExperimentConfig& cfg, const MomentData& data) {
    std::ostringstream os;
    json meta;
    meta["tool_version"] = fluctsim_version();
    meta["base_seed"] = cfg.base_seed;
    meta["n_runs"] = cfg.n_runs;
    meta["mu_eps"] = data.mu_eps;
    os << meta.dump() << "\n";
    for (int r = 0; r < data.n_runs(); ++r)
        for (int s = 0; s < data.n_slots(); ++s) {
            json row;
            row["run"] = r;
            row["test_id"] = data.slot_ids[std::size_t(s)];
            row["time"] = data.slot_times[std::size_t(s)];
            row["raw"] = data.raw[std::size_t(r)][std::size_t(s)];
            os << row.dump() << "\n";
        }
    return os.str();
}

std::string covariance_csv(const MomentData& data) {
    std::ostringstream os;
    os << "test_a,time_a,test_b,time_b,value,std_error,correlation,fisher_lo,fisher_hi\n";
    for (int a = 0; a < data.n_slots(); ++a)
        for (int b = a; b < data.n_slots(); ++b) {
            auto c = covariance_estimate(data, a, b);
            os << data.slot_ids[std::size_t(a)] << "," << format_g17(data.slot_times[std::size_t(a)])
               << "," << data.slot_ids[std::size_t(b)] << ","
               << format_g17(data.slot_times[std::size_t(b)]) << "," << format_g17(c.value) << ","
               << format_g17(c.std_error) << "," << format_g17(c.correlation) << ","
               << format_g17(c.fisher_lo) << "," << format_g17(c.fisher_hi) << "\n";
        }
    return os.str();
}

std::string moments_csv(const MomentData& data) {
    // A small designated list, fixed before any data is seen: powers of the
    // first slot, plus mixed moments with the second when present.
    std::vector<std::vector<int>> sets = {{0, 0}, {0, 0, 0}, {0, 0, 0, 0}};
    if (data.n_slots() > 1) {
        sets.push_back({0, 1});
        sets.push_back({1, 1});
        sets.push_back({0, 0, 1});
        sets.push_back({0, 0, 1, 1});
    }
    std::vector<MomentEstimate> rows;
    rows.reserve(sets.size());
    for (const auto& s : sets) rows.push_back(estimate_product_moment(data, s));
    std::ostringstream os;
    write_moments_csv(os, data, rows);
    return os.str();
}

std::string shapes_csv(const MomentData& data) {
    std::ostringstream os;
    os << "test_id,time,skewness,skewness_se,excess_kurtosis,kurtosis_se\n";
    for (int s = 0; s < data.n_slots(); ++s) {
        auto sh = estimate_shape(data, s);
        os << data.slot_ids[std::size_t(s)] << "," << format_g17(data.slot_times[std::size_t(s)])
           << "," << format_g17(sh.skewness) << "," << format_g17(sh.skewness_se) << ","
           << format_g17(sh.excess_kurtosis) << "," << format_g17(sh.kurtosis_se) << "\n";
    }
    return os.str();
}

std::string fd_report_json(const ExperimentConfig& cfg, const FdReport& fd,
                           const DissipativityReport& diss) {
    json j;
    j["base_seed"] = cfg.base_seed;
    j["n_mc"] = cfg.galerkin.n_mc;
    j["pass"] = fd.pass;
    j["max_residual"] = fd.max_residual;
    j["max_z"] = fd.max_z;
    j["max_exact_residual"] = fd.max_exact_residual;
    j["n_mc_entries"] = fd.n_mc_entries;
    j["detail"] = fd.detail;
    j["dissipativity"] = {{"max_sym_eigenvalue", diss.max_sym_eigenvalue},
                          {"tol", diss.tol},
                          {"pass", diss.pass}};
    return j.dump(2) + "\n";
}

std::string matrix_csv(const Eigen::MatrixXd& m) {
    std::ostringstream os;
    write_matrix_csv(os, m);
    return os.str();
}

std::string ou_stationary_csv(const GalerkinBasis& basis, const OUResult& res) {
    std::ostringstream os;
    os << "row,col,row_label,col_label,value,std_error,target,z\n";
    for (int k = 0; k < res.stationary_cov.rows(); ++k)
        for (int l = 0; l < res.stationary_cov.cols(); ++l) {
            double target = k == l ? 1.0 : 0.0;
            double se = res.stationary_se(k, l);
            double z = se > 0 ? (res.stationary_cov(k, l) - target) / se : 0.0;
            os << k << "," << l << "," << basis.label(k) << "," << basis.label(l) << ","
               << format_g17(res.stationary_cov(k, l)) << "," << format_g17(se) << ","
               << format_g17(target) << "," << format_g17(z) << "\n";
        }
    return os.str();
}

std::string ou_lagged_csv(const GeneratorMatrix& gen, const OUResult& res) {
    std::ostringstream os;
    os << "lag,row,col,value,std_error,predicted,z\n";
    for (std::size_t li = 0; li < res.lag_times.size(); ++li) {
        // Empirical (k,l) estimates E[X_t(k) X_{t+lag}(l)]; the propagated
        // prediction h . exp(tB) g with g = e_k, h = e_l is entry (l,k) of
        // the exponential.
        Eigen::MatrixXd pred = (res.lag_times[li] * gen.B).exp();
        for (int k = 0; k < res.lagged_cov[li].rows(); ++k)
            for (int l = 0; l < res.lagged_cov[li].cols(); ++l) {
                double se = res.lagged_se[li](k, l);
                double z = se > 0 ? (res.lagged_cov[li](k, l) - pred(l, k)) / se : 0.0;
                os << format_g17(res.lag_times[li]) << "," << k << "," << l << ","
                   << format_g17(res.lagged_cov[li](k, l)) << "," << format_g17(se) << ","
                   << format_g17(pred(l, k)) << "," << format_g17(z) << "\n";
            }
    }
    return os.str();
}

std::string clusters_csv(const std::vector<UpsilonScanRow>& rows, double radius_scale) {
    std::ostringstream os;
    os << "eps,n_runs,n_violations,p_hat,ci_lo,ci_hi,radius_scale,param_violations\n";
    for (const auto& r : rows) {
        std::string viol;
        for (const auto& v : r.param_violations) {
            if (!viol.empty()) viol += "; ";
            viol += v;
        }
        os << format_g17(r.eps) << "," << r.n_runs << "," << r.n_violations << ","
           << format_g17(r.p_hat) << "," << format_g17(r.ci.lo) << "," << format_g17(r.ci.hi)
           << "," << format_g17(radius_scale) << ",\"" << viol << "\"\n";
    }
    return os.str();
}

std::string balance_csv(const BalanceReport& rep) {
    std::ostringstream os;
    os << "label,gain,loss,gain_se,loss_se,residual,combined_se,z,exact_zero\n";
    for (const auto& e : rep.entries)
        os << e.label << "," << format_g17(e.gain) << "," << format_g17(e.loss) << ","
           << format_g17(e.gain_se) << "," << format_g17(e.loss_se) << ","
           << format_g17(e.residual) << "," << format_g17(e.combined_se) << ","
           << format_g17(e.z) << "," << (e.exact_zero ? 1 : 0) << "\n";
    return os.str();
}

std::string balance_report_json(const ExperimentConfig& cfg, const BalanceReport& rep) {
    json j;
    j["base_seed"] = cfg.base_seed;
    j["n_mc"] = rep.n_mc;
    j["shared_stream"] = rep.shared_stream;
    j["max_abs_z"] = rep.max_abs_z;
    j["max_abs_residual"] = rep.max_abs_residual;
    j["pass"] = rep.pass;
    return j.dump(2) + "\n";
}

}  // namespace

int run_experiment(const std::string& config_path, const RunOverrides& ov, std::ostream& log,
                   std::ostream& err) {
    auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig cfg;
    try {
        cfg = parse_experiment_config(read_text_file(config_path));
    } catch (const std::exception& e) {
        err << e.what() << "\n";
        return 2;
    }
    if (ov.seed) cfg.base_seed = *ov.seed;
    if (ov.out_dir) cfg.output_dir = *ov.out_dir;
    if (ov.workers) cfg.workers = *ov.workers;
    if (ov.analyses) cfg.analyses = *ov.analyses;
    if (ov.skip_ensemble && (cfg.analyses.covariance || cfg.analyses.wick)) {
        err << "covariance and wick analyses need the ensemble stage\n";
        return 2;
    }

    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec) {
        err << "cannot create output directory '" << cfg.output_dir << "': " << ec.message()
            << "\n";
        return 2;
    }

    RunManifest man;
    man.tool_version = fluctsim_version();
    man.config_hash = hash_hex(fnv1a64(cfg.raw_text));
    man.base_seed = cfg.base_seed;
    for (long r = 0; r < cfg.n_runs; ++r)
        man.run_seeds.push_back(derive_seed(cfg.base_seed, {tag_sampler, std::uint64_t(r)}));

    std::vector<std::string> written;
    auto emit = [&](const std::string& name, const std::string& text) {
        write_text_file(cfg.output_dir + "/" + name, text);
        written.push_back(name);
        log << "wrote " << name << " (" << text.size() << " bytes)\n";
    };
    auto analysis = [&](const char* name, auto&& body) {
        try {
            body();
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string("analysis '") + name + "': " + e.what());
        }
    };

    try {
        emit("config.json", cfg.raw_text);

        if (!ov.skip_ensemble) {
            log << "ensemble: " << cfg.n_runs << " runs, " << cfg.t_samples.size()
                << " sample times, " << cfg.test_functions.size() << " test functions\n";
            std::string snaps;
            MomentData data = collect_ensemble(cfg, &snaps);
            emit("snapshots_run0.jsonl", snaps);
            emit("fields.jsonl", fields_jsonl(cfg, data));

            if (cfg.analyses.covariance)
                analysis("covariance", [&] { emit("covariance.csv", covariance_csv(data)); });
            if (cfg.analyses.wick) analysis("wick", [&] {
                emit("moments.csv", moments_csv(data));
                emit("shapes.csv", shapes_csv(data));
            });
        }

        GalerkinBasis basis(cfg.domain.d, cfg.galerkin.fourier_cutoff, cfg.galerkin.hermite_cutoff);
        GeneratorMatrix gen;
        NoiseMatrix noise;
        bool have_matrices = false;
        auto need_matrices = [&] {
            if (have_matrices) return;
            log << "assembling generator and noise (basis size " << basis.size() << ", n_mc "
                << cfg.galerkin.n_mc << ")\n";
            gen = assemble_generator(basis, cfg.galerkin.n_mc, cfg.base_seed, cfg.workers);
            noise = assemble_noise(basis, cfg.galerkin.n_mc, cfg.base_seed, cfg.workers);
            have_matrices = true;
        };

        if (cfg.analyses.fd_check) analysis("fd_check", [&] {
            need_matrices();
            emit("generator.csv", matrix_csv(gen.B));
            emit("generator_meta.json", matrix_header_json("generator", basis, gen.n_mc,
                                                           gen.mc_error.maxCoeff()) + "\n");
            emit("noise.csv", matrix_csv(noise.C));
            emit("noise_meta.json", matrix_header_json("noise", basis, noise.n_mc,
                                                       noise.mc_error.maxCoeff()) + "\n");
            emit("fd_report.json",
                 fd_report_json(cfg, fd_check(gen, noise), dissipativity_check(gen)));
        });

        if (cfg.analyses.ou) analysis("ou", [&] {
            need_matrices();
            OUOptions opts;
            opts.record_dt = cfg.ou.record_dt;
            opts.dt = commensurate_dt(opts.record_dt, accuracy_dt_bound(gen));
            opts.t_end = cfg.ou.t_end;
            opts.n_paths = cfg.ou.n_paths;
            opts.lag_times = cfg.ou.lag_times;
            log << "ou: " << opts.n_paths << " paths to t = " << opts.t_end << ", dt = " << opts.dt
                << "\n";
            OUResult res = ou_simulate(gen, noise, opts, cfg.base_seed, cfg.workers);
            emit("ou_stationary.csv", ou_stationary_csv(basis, res));
            emit("ou_lagged.csv", ou_lagged_csv(gen, res));
        });

        if (cfg.analyses.clusters) analysis("clusters", [&] {
            std::vector<DomainParams> doms;
            for (double e : cfg.clusters.eps_values) doms.emplace_back(cfg.domain.d, e);
            UpsilonScanConfig sc;
            sc.thetas = cfg.clusters.thetas;
            sc.k_max = cfg.clusters.k_max;
            sc.r_max = cfg.clusters.r_max;
            sc.tau = cfg.clusters.tau;
            sc.horizon = cfg.clusters.horizon;
            sc.radius_scale = cfg.clusters.radius_scale;
            sc.strict = cfg.clusters.strict;
            sc.n_runs = cfg.clusters.n_runs;
            sc.sampler = cfg.sampler;
            auto rows = upsilon_probability_scan(doms, sc, cfg.base_seed);
            emit("clusters.csv", clusters_csv(rows, sc.radius_scale));
        });

        if (cfg.analyses.balance) analysis("balance", [&] {
            auto rep = equilibrium_balance(basis, cfg.domain, cfg.galerkin.n_mc, cfg.base_seed,
                                           false, cfg.workers);
            emit("balance.csv", balance_csv(rep));
            emit("balance_report.json", balance_report_json(cfg, rep));
        });
    } catch (const std::exception& e) {
        err << e.what() << "\n";
        return 1;
    }

    man.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& name : written) man.files.push_back(inventory_file(cfg.output_dir, name));
    std::ostringstream ms;
    write_manifest_json(ms, man);
    write_text_file(cfg.output_dir + "/manifest.json", ms.str());
    log << "wrote manifest.json (" << written.size() << " artifacts, "
        << format_g17(man.wall_clock_seconds) << " s)\n";
    return 0;
}

}  // namespace fluctsim
