#include "hsk/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iterator>
#include <numbers>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <boost/version.hpp>
#include <omp.h>
#include <openssl/crypto.h>

#include "hsk/bg.hpp"
#include "hsk/errors.hpp"
#include "hsk/hierarchy.hpp"
#include "hsk/kinetic.hpp"
#include "hsk/presets.hpp"
#include "hsk/stats.hpp"

#ifndef HSK_VERSION
#define HSK_VERSION "0.0.0"
#endif

namespace hsk::cli {

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> threads;
    std::vector<std::string> sets;
    std::string check;
};

/// What a pipeline hands back: files written (relative names) and a summary.
struct Outcome {
    std::vector<std::string> files;
    json results = json::object();
    json seeds = json::object();
    bool check_failed = false;
};

std::string utc_now()
{
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string e12(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return buf;
}

std::string g10(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

class RunDir {
public:
    explicit RunDir(std::filesystem::path dir) : dir_(std::move(dir)) {}
    void write(const std::string& name, const std::string& text, Outcome& o) const
    {
        write_file_atomic(dir_ / name, text);
        o.files.push_back(name);
    }
    const std::filesystem::path& path() const { return dir_; }

private:
    std::filesystem::path dir_;
};

MomentumLaw law_from(const json& s)
{
    if (s.at("law") == "counter_streaming")
        return counter_streaming_law(s.at("drift").get<double>(), s.at("spread").get<double>());
    return maxwellian_law(s.at("temperature").get<double>());
}

HistogramSpec histogram_from(const json& s)
{
    return {s.at("histogram_bins").get<std::size_t>(), s.at("histogram_half_width").get<double>()};
}

void summarize_h(const RunResult& r, json& results)
{
    if (r.h_series.empty())
        return;
    results["H_initial"] = r.h_series.front();
    results["H_final"] = r.h_series.back();
    results["H_noise"] = r.h_noise;
    const std::size_t window = std::max<std::size_t>(2, r.h_series.size() / 20);
    if (r.h_series.size() >= 2 * window)
        results["H_nonincreasing_windows"] =
            nonincreasing_window_fraction(r.h_series, window, r.h_noise);
}

Outcome run_md(const json& s, std::uint64_t seed, const RunDir& dir, std::ostream& out)
{
    Outcome o;
    const auto n = s.at("particles").get<std::size_t>();
    const double eps = s.at("epsilon").get<double>();
    const double t_end = s.at("t_end").get<double>();
    const auto snaps = s.at("snapshots").get<std::size_t>();
    const auto box = Boundary::periodic_box(s.at("box_side").get<double>());
    const std::uint64_t init_seed = derive_seed(seed, 0x4D44);
    o.seeds["initial_state"] = init_seed;
    Rng rng{init_seed};
    ChaosSampleStats cs;
    PhaseState st = sample_chaos_state(law_from(s), n, eps, box, rng, ChaosSampling::incremental, &cs);
    const double e0 = total_energy(st.particles);
    std::ostringstream csv;
    csv << "t,collisions,energy,px,py,pz,min_contact_ratio\n";
    std::size_t collisions = 0;
    double min_ratio = std::numeric_limits<double>::infinity();
    auto row = [&](double t) {
        const Vec3 p = total_momentum(st.particles);
        csv << g10(t) << ',' << collisions << ',' << e12(total_energy(st.particles)) << ','
            << e12(p.x) << ',' << e12(p.y) << ',' << e12(p.z) << ','
            << (std::isfinite(min_ratio) ? e12(min_ratio) : std::string("nan")) << '\n';
    };
    row(0.0);
    for (std::size_t k = 1; k <= snaps; ++k) {
        FlowStats fs;
        st = hard_sphere_flow(std::move(st), t_end / static_cast<double>(snaps), FlowOptions{}, &fs);
        collisions += fs.collisions;
        if (fs.collisions > 0)
            min_ratio = std::min(min_ratio, fs.min_contact_ratio);
        for (std::size_t i = 0; i < st.size(); ++i)
            for (std::size_t j = i + 1; j < st.size(); ++j)
                if (norm(box.separation(st.particles[i].q, st.particles[j].q)) < eps * (1.0 - 1e-9))
                    throw NumericalError("md: overlap beyond tolerance after the flow");
        row(t_end * static_cast<double>(k) / static_cast<double>(snaps));
    }
    dir.write("md.csv", csv.str(), o);
    std::ostringstream fin;
    fin << "particle,qx,qy,qz,px,py,pz\n";
    for (std::size_t i = 0; i < st.size(); ++i) {
        const auto& pt = st.particles[i];
        fin << i << ',' << e12(pt.q.x) << ',' << e12(pt.q.y) << ',' << e12(pt.q.z) << ','
            << e12(pt.p.x) << ',' << e12(pt.p.y) << ',' << e12(pt.p.z) << '\n';
    }
    dir.write("md_final.csv", fin.str(), o);
    o.results["collisions"] = collisions;
    o.results["energy_relative_drift"] = std::abs(total_energy(st.particles) - e0) / e0;
    o.results["insertion_acceptance"] = cs.acceptance();
    out << "md: " << collisions << " collisions, relative energy drift "
        << o.results["energy_relative_drift"].get<double>() << '\n';
    return o;
}

SolverConfig solver_from(const json& s, std::uint64_t seed)
{
    SolverConfig cfg;
    cfg.dt = s.at("dt").get<double>();
    cfg.t_end = s.at("t_end").get<double>();
    cfg.g_max = s.at("g_max").get<double>();
    cfg.histogram = histogram_from(s);
    cfg.seed = seed;
    cfg.cells = s.at("cells").get<std::size_t>();
    cfg.length = s.at("length").get<double>();
    return cfg;
}

Outcome run_boltzmann(const json& s, std::uint64_t seed, const RunDir& dir, std::ostream& out)
{
    Outcome o;
    auto cfg = solver_from(s, seed);
    const auto n = s.at("samples").get<std::size_t>();
    const double density = s.at("density").get<double>();
    const double temp = s.at("temperature").get<double>();
    const bool beams = s.at("initial") == "two_beam";
    const std::uint64_t init_seed = derive_seed(seed, 0x1A17);
    o.seeds["initial_state"] = init_seed;
    o.seeds["collisions"] = seed;
    Rng rng{init_seed};
    std::ostringstream csv;
    RunResult r;
    if (s.at("geometry") == "homogeneous") {
        VelocityEnsemble ens;
        ens.samples = beams ? two_beam_samples(n, s.at("beam_speed").get<double>())
                            : maxwellian_samples(n, temp, {}, rng);
        ens.weight = density / static_cast<double>(n);
        r = run_homogeneous(std::move(ens), cfg, &csv);
    } else {
        cfg.homogeneous = false;
        const double a = s.at("gradient").get<double>();
        auto ens = slab_state(n, cfg.length, cfg.cells, density, triangle_profile(cfg.length, a),
                              1.0 + a, temp, rng);
        if (beams)
            ens.p = two_beam_samples(n, s.at("beam_speed").get<double>());
        r = run_slab(std::move(ens), cfg, &csv);
    }
    dir.write("kinetic.csv", csv.str(), o);
    o.results["steps"] = r.steps;
    o.results["collisions"] = r.stats.collisions;
    o.results["g_max"] = r.g_max;
    o.results["temperature_final"] = temperature(r.p);
    summarize_h(r, o.results);
    out << "boltzmann: " << r.steps << " steps, " << r.stats.collisions
        << " collisions, final temperature " << temperature(r.p) << '\n';
    return o;
}

Outcome run_enskog(const json& s, std::uint64_t seed, const RunDir& dir, std::ostream& out)
{
    Outcome o;
    auto cfg = solver_from(s, seed);
    cfg.homogeneous = false;
    cfg.model = CollisionModel::enskog_displaced;
    cfg.epsilon = s.at("epsilon").get<double>();
    cfg.functional_order = s.at("functional_order").get<int>();
    const auto n = s.at("samples").get<std::size_t>();
    const double density = s.at("density").get<double>();
    const double temp = s.at("temperature").get<double>();
    const double a = s.at("gradient").get<double>();
    const std::uint64_t init_seed = derive_seed(seed, 0x1A17);
    o.seeds["initial_state"] = init_seed;
    o.seeds["collisions"] = seed;
    Rng rng{init_seed};
    auto ens = slab_state(n, cfg.length, cfg.cells, density, triangle_profile(cfg.length, a),
                          1.0 + a, temp, rng);
    std::ostringstream csv;
    const RunResult r = run_slab(std::move(ens), cfg, &csv);
    dir.write("kinetic.csv", csv.str(), o);
    o.results["steps"] = r.steps;
    o.results["collisions"] = r.stats.collisions;
    o.results["collisional_flux"] = r.collisional_flux;
    o.results["uniform_gas_flux"] = 2.0 * std::numbers::pi / 3.0 * density * density *
                                    cfg.epsilon * temp;
    summarize_h(r, o.results);
    out << "enskog: " << r.stats.collisions << " collisions, collisional xx flux "
        << r.collisional_flux << '\n';
    return o;
}

Outcome run_rods(const json& s, const RunDir& dir, std::ostream& out)
{
    Outcome o;
    const auto f2 = rod_gradient_state(s.at("amplitude").get<double>(),
                                       s.at("correlation").get<double>(),
                                       s.at("temperature").get<double>());
    RodIntegralOptions opt;
    opt.cutoff = s.at("cutoff").get<double>();
    opt.tolerance = s.at("tolerance").get<double>();
    const double q1 = s.at("q1").get<double>(), p1 = s.at("p1").get<double>();
    std::ostringstream csv;
    csv << "epsilon,integral,error_estimate,tail_fraction\n";
    std::vector<double> le, li;
    for (double eps : s.at("epsilons").get<std::vector<double>>()) {
        const auto r = hard_rod_collision_integral_1d(f2, q1, p1, eps, opt);
        csv << e12(eps) << ',' << e12(r.value) << ',' << e12(r.error_estimate) << ','
            << e12(r.tail_fraction) << '\n';
        if (r.tail_warning)
            out << "rods1d: warning: tail fraction " << r.tail_fraction << " at eps " << eps
                << " exceeds 1%; raise the cutoff\n";
        if (r.value != 0.0) {
            le.push_back(std::log(eps));
            li.push_back(std::log(std::abs(r.value)));
        }
    }
    dir.write("rods.csv", csv.str(), o);
    if (le.size() >= 2) {
        o.results["loglog_slope"] = fit_line(le, li).slope;
        out << "rods1d: log-log slope in eps " << o.results["loglog_slope"].get<double>() << '\n';
    }
    return o;
}

Outcome run_hierarchy(const json& s, std::uint64_t seed, const std::string& check,
                      const RunDir& dir, std::ostream& out)
{
    Outcome o;
    const double half = s.at("support").get<double>();
    ProductState ps{compact_chaos_f1(half, s.at("mass").get<double>()), s.at("epsilon").get<double>(),
                    Boundary::unbounded(), s.at("particles").get<std::size_t>()};
    const auto seq = ps.marginals();
    PairingSpec spec;
    spec.mc_samples = s.at("samples").get<std::size_t>();
    spec.domain.lo = {-half - 0.2, -half - 0.2, -half - 0.2};
    spec.domain.hi = {half + 0.2, half + 0.2, half + 0.2};
    spec.domain.momentum_sigma = 1.2;
    spec.seed = derive_seed(seed, 0xD0A1);
    o.seeds["pairing"] = spec.seed;
    std::vector<std::pair<std::string, ObservableSpec>> obs;
    const auto which = s.at("observables").get<std::string>();
    if (which != "binary")
        obs.push_back({"additive", {ObservableKind::additive, 1, compact_additive_observable()}});
    if (which != "additive")
        obs.push_back({"binary", {ObservableKind::k_ary, 2, compact_binary_observable()}});
    std::ostringstream csv;
    csv << "t,observable,observable_picture,observable_err,state_picture,state_err,residual,sigma\n";
    bool all_ok = true;
    json rows = json::array();
    for (double t : s.at("times").get<std::vector<double>>())
        for (const auto& [name, ob] : obs) {
            const auto r = duality_residual(ob, seq, t, spec);
            csv << g10(t) << ',' << name << ',' << e12(r.observable_picture.value) << ','
                << e12(r.observable_picture.std_error) << ',' << e12(r.state_picture.value) << ','
                << e12(r.state_picture.std_error) << ',' << e12(r.residual) << ','
                << e12(r.sigma) << '\n';
            const bool ok = r.within_3_sigma();
            all_ok = all_ok && ok;
            out << "duality t=" << t << " " << name << " residual=" << r.residual
                << " sigma=" << r.sigma << (ok ? " ok" : " FAIL (residual > 3 sigma)") << '\n';
            rows.push_back({{"t", t}, {"observable", name}, {"residual", r.residual},
                            {"sigma", r.sigma}, {"within_3_sigma", ok}});
        }
    dir.write("duality.csv", csv.str(), o);
    o.results["duality"] = rows;
    o.results["all_within_3_sigma"] = all_ok;
    o.check_failed = check == "duality" && !all_ok;
    return o;
}

Outcome run_bgscan(const json& s, std::uint64_t seed, const RunDir& dir, std::ostream& out)
{
    Outcome o;
    ScalingPlan plan;
    plan.epsilons = s.at("epsilons").get<std::vector<double>>();
    plan.density_constant = s.at("density_constant").get<double>();
    plan.box_side = s.at("box_side").get<double>();
    plan.replicas = s.at("replicas").get<std::size_t>();
    plan.t_grid = s.at("t_grid").get<std::vector<double>>();
    plan.particle_cap = s.at("particle_cap").get<std::size_t>();
    plan.reference_samples = s.at("reference_samples").get<std::size_t>();
    plan.reference_steps_per_unit = s.at("reference_steps_per_unit").get<std::size_t>();
    plan.jackknife_groups = s.at("jackknife_groups").get<std::size_t>();
    plan.collisions = s.at("collisions").get<bool>();
    plan.sampling = s.at("sampling") == "whole_config" ? ChaosSampling::whole_config
                                                       : ChaosSampling::incremental;
    plan.axes.momentum_bins = s.at("momentum_bins").get<std::size_t>();
    plan.axes.momentum_range = s.at("momentum_range").get<double>();
    plan.axes.shells = s.at("shells").get<std::size_t>();
    plan.axes.shell_width = s.at("shell_width").get<double>();
    plan.axes.contact_factor = s.at("contact_factor").get<double>();
    plan.seed = seed;
    o.seeds["replicas"] = "make_rng(seed, 0x100 + eps index, replica)";
    const auto rep = bg_convergence_report(
        plan, counter_streaming_law(s.at("drift").get<double>(), s.at("spread").get<double>()));
    std::ostringstream csv;
    write_bg_csv(csv, rep);
    dir.write("bg.csv", csv.str(), o);
    o.results["mean_free_time"] = rep.mean_free_time;
    json trends = json::array();
    for (std::size_t g = 0; g < rep.l1_trend.size(); ++g) {
        trends.push_back({{"t_mft", plan.t_grid[g]},
                          {"L1_decreasing", rep.l1_trend[g].passed()},
                          {"L1_slope_z", rep.l1_trend[g].slope_z},
                          {"chi_decreasing", rep.chi_trend[g].passed()},
                          {"chi_slope_z", rep.chi_trend[g].slope_z}});
        out << "bgscan t=" << plan.t_grid[g] << " mft: L1 trend "
            << (rep.l1_trend[g].passed() ? "decreasing" : "not significant") << ", chi trend "
            << (rep.chi_trend[g].passed() ? "decreasing" : "not significant") << '\n';
    }
    o.results["trends"] = trends;
    return o;
}

std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("config: cannot read '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int print_diagnostics(const std::vector<Diagnostic>& d, std::ostream& os)
{
    for (const auto& x : d)
        os << x.str() << '\n';
    return d.empty() ? exit_ok : exit_validation;
}

int run_validate(const Options& o, const std::string& manifest, bool print_schema,
                 std::ostream& out, std::ostream& err)
{
    if (print_schema) {
        out << schema_document().dump(2) << '\n';
        return exit_ok;
    }
    if (!manifest.empty()) {
        const auto d = verify_manifest(manifest);
        if (d.empty())
            out << "manifest ok\n";
        return print_diagnostics(d, err);
    }
    if (o.config.empty()) {
        err << "validate: --config or --manifest is required\n";
        return exit_validation;
    }
    json cfg;
    try {
        cfg = json::parse(read_text(o.config));
        for (const auto& s : o.sets)
            apply_override(cfg, s);
    } catch (const std::exception& e) {
        err << "config: " << e.what() << '\n';
        return exit_validation;
    }
    if (o.seed)
        cfg["seed"] = *o.seed;
    const auto d = validate_config(cfg);
    if (d.empty())
        out << "config ok\n";
    return print_diagnostics(d, out);
}

int run_pipeline(const std::string& command, const Options& o, std::ostream& out, std::ostream& err)
{
    const auto t0 = std::chrono::steady_clock::now();
    RunManifest m;
    m.command = command;
    m.started_at = utc_now();
    m.versions = component_versions();
    json cfg;
    std::string raw;
    try {
        if (o.config.empty())
            throw ValidationError("--config is required");
        raw = read_text(o.config);
        cfg = json::parse(raw);
        for (const auto& s : o.sets)
            apply_override(cfg, s);
    } catch (const std::exception& e) {
        err << "config: " << e.what() << '\n';
        return exit_validation;
    }
    if (o.seed)
        cfg["seed"] = *o.seed;
    if (o.threads)
        cfg["threads"] = *o.threads;
    if (const auto d = validate_config(cfg, command); !d.empty())
        return print_diagnostics(d, err);

    m.config_path = std::filesystem::absolute(o.config).string();
    m.config_sha256 = sha256_hex(raw);
    m.overrides = o.sets;
    m.resolved_config = resolve_config(cfg, command);
    m.resolved_sha256 = sha256_hex(m.resolved_config.dump());
    m.seed = m.resolved_config.at("seed").get<std::uint64_t>();
    m.threads = m.resolved_config.at("threads").get<int>();

    std::filesystem::path dir = o.out;
    if (dir.empty())
        dir = m.resolved_config.at("output").get<std::string>();
    if (dir.empty()) {
        const char* root = std::getenv(output_root_env);
        dir = std::filesystem::path(root && *root ? root : "runs") /
              (command + "-" + m.resolved_sha256.substr(0, 12));
    }
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        err << "output: cannot create directory " << dir.string() << '\n';
        return exit_validation;
    }
    if (m.threads > 0)
        omp_set_num_threads(m.threads);

    const RunDir rd(dir);
    const json& sec = m.resolved_config.at(command);
    Outcome res;
    int code = exit_ok;
    try {
        if (command == "md")
            res = run_md(sec, m.seed, rd, out);
        else if (command == "boltzmann")
            res = run_boltzmann(sec, m.seed, rd, out);
        else if (command == "enskog")
            res = run_enskog(sec, m.seed, rd, out);
        else if (command == "rods1d")
            res = run_rods(sec, rd, out);
        else if (command == "hierarchy")
            res = run_hierarchy(sec, m.seed, o.check, rd, out);
        else if (command == "bgscan")
            res = run_bgscan(sec, m.seed, rd, out);
        else
            throw ValidationError("unknown subcommand " + command);
        if (res.check_failed)
            code = exit_check_failed;
    } catch (const ValidationError& e) {
        err << command << ": " << e.what() << '\n';
        code = exit_validation;
    } catch (const NumericalError& e) {
        err << command << ": numerical failure: " << e.what() << '\n';
        code = exit_numerical;
    }
    for (const auto& f : res.files) {
        const auto p = dir / f;
        m.files.push_back({f, sha256_file(p), std::filesystem::file_size(p)});
    }
    m.seeds = res.seeds;
    m.seeds["master"] = m.seed;
    m.results = res.results;
    m.exit_code = code;
    m.finished_at = utc_now();
    m.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    try {
        write_file_atomic(dir / "manifest.json", m.to_json().dump(2) + "\n");
    } catch (const ValidationError& e) {
        err << "manifest: " << e.what() << '\n';
        return code == exit_ok ? exit_validation : code;
    }
    out << "wrote " << (dir / "manifest.json").string() << '\n';
    return code;
}

} // namespace

json component_versions()
{
    return {{"hsk", HSK_VERSION},
            {"compiler", __VERSION__},
            {"cxx_standard", static_cast<long>(__cplusplus)},
            {"openmp", _OPENMP},
            {"boost", BOOST_LIB_VERSION},
            {"openssl", OpenSSL_version(OPENSSL_VERSION)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"cli11", CLI11_VERSION}};
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Hard-sphere kinetic toolkit"};
    app.name("hsk");
    app.require_subcommand(1);
    Options opts;
    std::string manifest;
    bool print_schema = false;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config, "JSON experiment config");
        sub->add_option("--seed", opts.seed, "master seed, overrides the config");
        sub->add_option("--out", opts.out, "output directory");
        sub->add_option("--threads", opts.threads, "OpenMP thread budget")->check(CLI::NonNegativeNumber);
        sub->add_option("--set", opts.sets, "key=value override (dotted key), repeatable");
    };
    const std::vector<std::pair<std::string, std::string>> subs{
        {"md", "hard-sphere molecular dynamics"},
        {"boltzmann", "DSMC Boltzmann solver"},
        {"enskog", "Enskog slab solver"},
        {"rods1d", "1D hard-rod collision integral"},
        {"hierarchy", "dual hierarchy pairings"},
        {"bgscan", "Boltzmann-Grad convergence sweep"},
    };
    for (const auto& [name, help] : subs) {
        auto* sub = app.add_subcommand(name, help);
        common(sub);
        if (name == "hierarchy")
            sub->add_option("--check", opts.check, "exit 3 unless the check passes")
                ->check(CLI::IsMember({"duality"}));
    }
    auto* val = app.add_subcommand("validate", "check a config or a run manifest without running");
    common(val);
    val->add_option("--manifest", manifest, "run manifest to re-verify");
    val->add_flag("--print-schema", print_schema, "print the config JSON Schema");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_validation;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "validate")
        return run_validate(opts, manifest, print_schema, out, err);
    return run_pipeline(cmd, opts, out, err);
}

} // namespace hsk::cli
