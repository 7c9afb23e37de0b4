#include "hsk/cli.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "hsk/bg.hpp"
#include "hsk/errors.hpp"

namespace hsk::cli {

namespace {

enum class Kind { integer, number, boolean, string, number_list };

struct FieldSpec {
    FieldSpec(std::string n, Kind k, json fb, std::string d, std::optional<double> lo = {},
              bool strict = false)
        : name(std::move(n)), kind(k), fallback(std::move(fb)), description(std::move(d)), min(lo),
          exclusive(strict)
    {
    }

    std::string name;
    Kind kind;
    json fallback;
    std::string description;
    std::optional<double> min;
    bool exclusive = false; ///< min is a strict bound
    std::optional<double> max;
    std::vector<std::string> choices;
};

struct SectionSpec {
    std::string name;
    std::string description;
    std::vector<FieldSpec> fields;
};

FieldSpec positive(std::string name, double fallback, std::string description)
{
    return {std::move(name), Kind::number, fallback, std::move(description), 0.0, true};
}

FieldSpec nonneg(std::string name, double fallback, std::string description)
{
    return {std::move(name), Kind::number, fallback, std::move(description), 0.0};
}

FieldSpec count(std::string name, std::int64_t fallback, double min, std::string description)
{
    return {std::move(name), Kind::integer, fallback, std::move(description), min};
}

FieldSpec choice(std::string name, std::string fallback, std::vector<std::string> choices,
                 std::string description)
{
    FieldSpec f{std::move(name), Kind::string, fallback, std::move(description)};
    f.choices = std::move(choices);
    return f;
}

FieldSpec list(std::string name, std::vector<double> fallback, double min, bool exclusive,
               std::string description)
{
    return {std::move(name), Kind::number_list, fallback, std::move(description), min, exclusive};
}

std::vector<FieldSpec> histogram_fields()
{
    return {count("histogram_bins", 24, 3, "H grid bins per momentum axis"),
            positive("histogram_half_width", 5.0, "H grid half-width in thermal widths")};
}

const std::vector<FieldSpec>& global_fields()
{
    static const std::vector<FieldSpec> g{
        {"seed", Kind::integer, nullptr, "master seed (unsigned 64-bit); required", 0.0},
        count("threads", 0, 0, "OpenMP thread budget; 0 keeps the runtime default"),
        {"output", Kind::string, "", "output directory; empty selects <root>/<command>-<digest>"},
    };
    return g;
}

const std::vector<SectionSpec>& sections()
{
    static const std::vector<SectionSpec> s = [] {
        std::vector<SectionSpec> v;
        v.push_back({"md",
                     "hard-sphere molecular dynamics of a chaos state in a periodic box",
                     {count("particles", 10, 1, "number of spheres"),
                      positive("epsilon", 0.1, "sphere diameter"),
                      positive("box_side", 2.0, "periodic box side"),
                      nonneg("t_end", 5.0, "final time"),
                      count("snapshots", 10, 1, "equally spaced output times after t = 0"),
                      choice("law", "maxwellian", {"maxwellian", "counter_streaming"},
                             "one-particle momentum law"),
                      positive("temperature", 1.0, "maxwellian law temperature"),
                      nonneg("drift", 1.2, "counter_streaming beam drift"),
                      positive("spread", 0.6, "counter_streaming beam thermal spread")}});
        auto kinetic = [](std::string name, std::string description, bool enskog) {
            SectionSpec sec{std::move(name), std::move(description), {}};
            auto& f = sec.fields;
            f.push_back(count("samples", enskog ? 200'000 : 100'000, 1000, "stochastic particles"));
            f.push_back(positive("density", 1.0, "mean number density"));
            f.push_back(positive("dt", enskog ? 0.02 : 0.01, "time step"));
            f.push_back(nonneg("t_end", 1.0, "final time, an integer multiple of dt"));
            f.push_back(positive("temperature", 1.0, "temperature of the Maxwellian initial state"));
            f.push_back(nonneg("g_max", 0.0, "relative-speed majorant; 0 picks a default"));
            if (enskog) {
                f.push_back(positive("epsilon", 0.2, "sphere diameter, below the cell size"));
                FieldSpec order = count("functional_order", 0, 0, "order of the two-particle functional");
                order.max = 1;
                f.push_back(order);
                f.push_back(count("cells", 16, 1, "slab cells"));
                f.push_back(positive("length", 8.0, "periodic slab length"));
                FieldSpec grad = nonneg("gradient", 0.5, "triangle density profile amplitude");
                grad.max = 1.0;
                f.push_back(grad);
            } else {
                f.push_back(choice("initial", "two_beam", {"two_beam", "maxwellian"},
                                   "initial momentum law"));
                f.push_back(positive("beam_speed", 1.0, "two_beam speed along x"));
                f.push_back(choice("geometry", "homogeneous", {"homogeneous", "slab"},
                                   "spatially homogeneous or 1D periodic slab"));
                f.push_back(count("cells", 1, 1, "slab cells"));
                f.push_back(positive("length", 1.0, "periodic slab length"));
                FieldSpec grad = nonneg("gradient", 0.0, "triangle density profile amplitude (slab)");
                grad.max = 1.0;
                f.push_back(grad);
            }
            for (auto& h : histogram_fields())
                f.push_back(h);
            return sec;
        };
        v.push_back(kinetic("boltzmann", "DSMC for the hard-sphere Boltzmann equation", false));
        v.push_back(kinetic("enskog", "displaced-collision Enskog solver in a periodic slab", true));
        v.push_back({"rods1d",
                     "1D hard-rod collision integral of a smooth gradient state",
                     {list("epsilons", {0.4, 0.2, 0.1, 0.05}, 0.0, true, "rod lengths"),
                      {"q1", Kind::number, 0.4, "evaluation position"},
                      {"p1", Kind::number, 0.6, "evaluation momentum"},
                      nonneg("amplitude", 0.5, "density modulation rho = 1 + a sin q"),
                      {"correlation", Kind::number, 0.3, "pair correlation coefficient"},
                      positive("temperature", 1.0, "temperature of the momentum factors"),
                      positive("cutoff", 12.0, "momentum-transfer cutoff"),
                      positive("tolerance", 1e-12, "quadrature relative tolerance")}});
        FieldSpec parts = count("particles", 2, 2, "support of the chaos state");
        parts.max = 3;
        v.push_back({"hierarchy",
                     "duality of the marginal state and observable series",
                     {parts,
                      positive("epsilon", 0.1, "sphere diameter"),
                      list("times", {0.5, 1.0}, 0.0, false, "evaluation times"),
                      count("samples", 100'000, 1000, "Monte Carlo samples per pairing"),
                      choice("observables", "both", {"additive", "binary", "both"},
                             "observables to pair"),
                      positive("support", 0.8, "half-width of the compact one-particle state"),
                      positive("mass", 3.0, "total mass of the one-particle state")}});
        v.push_back({"bgscan",
                     "Boltzmann-Grad sweep of hard-sphere replicas against a DSMC reference",
                     {list("epsilons", {0.2, 0.1, 0.05}, 0.0, true, "diameters, descending"),
                      positive("density_constant", 1.0, "c = N eps^2 / V"),
                      positive("box_side", 2.15, "periodic box side"),
                      count("replicas", 64, 2, "replicas per diameter"),
                      list("t_grid", {0.0, 0.25, 0.5}, 0.0, false, "times in mean free times"),
                      count("particle_cap", 10'000, 1, "largest admissible N"),
                      count("reference_samples", 1'000'000, 1000, "DSMC reference samples"),
                      count("reference_steps_per_unit", 40, 1, "DSMC steps per mean free time"),
                      count("jackknife_groups", 16, 2, "jackknife groups over replicas"),
                      nonneg("drift", 1.2, "counter-streaming beam drift"),
                      positive("spread", 0.6, "counter-streaming beam spread"),
                      {"collisions", Kind::boolean, true, "false: free transport on both sides"},
                      choice("sampling", "incremental", {"incremental", "whole_config"},
                             "rejection sampler of the initial chaos state"),
                      count("momentum_bins", 32, 1, "order-1 histogram bins per axis"),
                      positive("momentum_range", 4.0, "order-1 range in thermal widths"),
                      count("shells", 3, 1, "pair-histogram radial shells"),
                      positive("shell_width", 0.3, "pair-histogram radial extent"),
                      nonneg("contact_factor", 2.0, "excluded contact shell in units of eps")}});
        return v;
    }();
    return s;
}

const SectionSpec* find_section(const std::string& name)
{
    for (const auto& s : sections())
        if (s.name == name)
            return &s;
    return nullptr;
}

std::string show(const json& v) { return v.dump(); }

void check_bound(const FieldSpec& f, const std::string& path, double x, std::vector<Diagnostic>& d)
{
    if (!std::isfinite(x)) {
        d.push_back({path, "must be finite"});
        return;
    }
    if (f.min) {
        if (f.exclusive && !(x > *f.min))
            d.push_back({path, "must be > " + show(*f.min) + " (got " + show(x) + ")"});
        else if (!f.exclusive && !(x >= *f.min))
            d.push_back({path, "must be >= " + show(*f.min) + " (got " + show(x) + ")"});
    }
    if (f.max && x > *f.max)
        d.push_back({path, "must be <= " + show(*f.max) + " (got " + show(x) + ")"});
}

void check_field(const FieldSpec& f, const std::string& path, const json& v,
                 std::vector<Diagnostic>& d)
{
    switch (f.kind) {
    case Kind::integer:
        if (!v.is_number_integer()) {
            d.push_back({path, "must be an integer (got " + show(v) + ")"});
            return;
        }
        if (v.is_number_unsigned())
            check_bound(f, path, static_cast<double>(v.get<std::uint64_t>()), d);
        else
            check_bound(f, path, static_cast<double>(v.get<std::int64_t>()), d);
        return;
    case Kind::number:
        if (!v.is_number()) {
            d.push_back({path, "must be a number (got " + show(v) + ")"});
            return;
        }
        check_bound(f, path, v.get<double>(), d);
        return;
    case Kind::boolean:
        if (!v.is_boolean())
            d.push_back({path, "must be true or false (got " + show(v) + ")"});
        return;
    case Kind::string:
        if (!v.is_string()) {
            d.push_back({path, "must be a string (got " + show(v) + ")"});
            return;
        }
        if (!f.choices.empty() &&
            std::find(f.choices.begin(), f.choices.end(), v.get<std::string>()) == f.choices.end()) {
            std::string opts;
            for (const auto& c : f.choices)
                opts += (opts.empty() ? "" : ", ") + c;
            d.push_back({path, "must be one of " + opts + " (got " + show(v) + ")"});
        }
        return;
    case Kind::number_list:
        if (!v.is_array() || v.empty()) {
            d.push_back({path, "must be a non-empty array of numbers"});
            return;
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::string p = path + "[" + std::to_string(i) + "]";
            if (!v[i].is_number())
                d.push_back({p, "must be a number (got " + show(v[i]) + ")"});
            else
                check_bound(f, p, v[i].get<double>(), d);
        }
        return;
    }
}

void check_object(const std::vector<FieldSpec>& fields, const std::string& prefix, const json& obj,
                  std::vector<Diagnostic>& d)
{
    for (const auto& [key, value] : obj.items()) {
        const auto it = std::find_if(fields.begin(), fields.end(),
                                     [&](const FieldSpec& f) { return f.name == key; });
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (it == fields.end())
            d.push_back({path, "unknown field"});
        else
            check_field(*it, path, value, d);
    }
}

json section_with_defaults(const SectionSpec& spec, const json& given)
{
    json out = json::object();
    for (const auto& f : spec.fields)
        out[f.name] = given.contains(f.name) ? given.at(f.name) : f.fallback;
    return out;
}

double num(const json& s, const char* key) { return s.at(key).get<double>(); }

std::vector<double> nums(const json& s, const char* key)
{
    return s.at(key).get<std::vector<double>>();
}

void cross_checks(const std::string& name, const json& s, std::vector<Diagnostic>& d)
{
    auto multiple = [&](const char* dt_key, const char* t_key) {
        const double dt = num(s, dt_key), t = num(s, t_key);
        if (dt > 0.0 && t >= 0.0 && std::abs(t / dt - std::round(t / dt)) > 1e-9 * (t / dt + 1.0))
            d.push_back({name + "." + t_key, "must be an integer multiple of dt = " + show(dt)});
    };
    if (name == "md") {
        const double eps = num(s, "epsilon"), side = num(s, "box_side");
        if (!(side > 2.0 * eps))
            d.push_back({"md.box_side", "must exceed 2 epsilon = " + show(2.0 * eps)});
        const double n = s.at("particles").get<double>();
        const double phi = n * std::numbers::pi / 6.0 * eps * eps * eps / (side * side * side);
        if (phi > 0.3)
            d.push_back({"md.particles",
                         "packing fraction " + show(phi) + " exceeds 0.3; rejection sampling stalls"});
    } else if (name == "boltzmann") {
        multiple("dt", "t_end");
        if (s.at("geometry") == "homogeneous" && s.at("cells").get<std::int64_t>() != 1)
            d.push_back({"boltzmann.cells", "must be 1 for the homogeneous geometry"});
    } else if (name == "enskog") {
        multiple("dt", "t_end");
        const double cell = num(s, "length") / s.at("cells").get<double>();
        if (num(s, "epsilon") >= cell)
            d.push_back({"enskog.epsilon", "must be below the slab cell size length / cells = " +
                                               show(cell) + " (got " + show(s.at("epsilon")) + ")"});
    } else if (name == "bgscan") {
        ScalingPlan plan;
        plan.epsilons = nums(s, "epsilons");
        plan.density_constant = num(s, "density_constant");
        plan.box_side = num(s, "box_side");
        plan.replicas = s.at("replicas").get<std::size_t>();
        plan.t_grid = nums(s, "t_grid");
        plan.particle_cap = s.at("particle_cap").get<std::size_t>();
        plan.reference_samples = s.at("reference_samples").get<std::size_t>();
        plan.reference_steps_per_unit = s.at("reference_steps_per_unit").get<std::size_t>();
        plan.jackknife_groups = s.at("jackknife_groups").get<std::size_t>();
        plan.axes.momentum_bins = s.at("momentum_bins").get<std::size_t>();
        plan.axes.momentum_range = num(s, "momentum_range");
        plan.axes.shells = s.at("shells").get<std::size_t>();
        plan.axes.shell_width = num(s, "shell_width");
        plan.axes.contact_factor = num(s, "contact_factor");
        for (const auto& m : plan.diagnostics())
            d.push_back({"bgscan", m});
    }
}

json schema_for(const FieldSpec& f)
{
    json j;
    switch (f.kind) {
    case Kind::integer: j["type"] = "integer"; break;
    case Kind::number: j["type"] = "number"; break;
    case Kind::boolean: j["type"] = "boolean"; break;
    case Kind::string: j["type"] = "string"; break;
    case Kind::number_list:
        j["type"] = "array";
        j["minItems"] = 1;
        j["items"] = json{{"type", "number"}};
        break;
    }
    json& bounds = f.kind == Kind::number_list ? j["items"] : j;
    if (f.min)
        bounds[f.exclusive ? "exclusiveMinimum" : "minimum"] = *f.min;
    if (f.max)
        bounds["maximum"] = *f.max;
    if (!f.choices.empty())
        j["enum"] = f.choices;
    if (!f.fallback.is_null())
        j["default"] = f.fallback;
    j["description"] = f.description;
    return j;
}

} // namespace

const std::vector<std::string>& pipeline_commands()
{
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& s : sections())
            v.push_back(s.name);
        return v;
    }();
    return names;
}

json schema_document()
{
    json doc;
    doc["$schema"] = "https://json-schema.org/draft/2020-12/schema";
    doc["title"] = "hsk experiment config";
    doc["type"] = "object";
    doc["additionalProperties"] = false;
    doc["required"] = json::array({"seed"});
    json props = json::object();
    for (const auto& f : global_fields())
        props[f.name] = schema_for(f);
    for (const auto& s : sections()) {
        json sec;
        sec["type"] = "object";
        sec["description"] = s.description;
        sec["additionalProperties"] = false;
        json sp = json::object();
        for (const auto& f : s.fields)
            sp[f.name] = schema_for(f);
        sec["properties"] = sp;
        props[s.name] = sec;
    }
    doc["properties"] = props;
    return doc;
}

std::vector<Diagnostic> validate_config(const json& config, std::optional<std::string> section)
{
    std::vector<Diagnostic> d;
    if (!config.is_object()) {
        d.push_back({"(root)", "config must be a JSON object"});
        return d;
    }
    for (const auto& [key, value] : config.items()) {
        const bool global = std::any_of(global_fields().begin(), global_fields().end(),
                                        [&](const FieldSpec& f) { return f.name == key; });
        if (!global && !find_section(key))
            d.push_back({key, "unknown field"});
    }
    json globals = json::object();
    for (const auto& f : global_fields())
        if (config.contains(f.name))
            globals[f.name] = config.at(f.name);
    check_object(global_fields(), "", globals, d);
    if (!config.contains("seed")) {
        std::random_device rd;
        const std::uint64_t proposal = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        d.push_back({"seed", "missing; runs need an explicit seed, e.g. \"seed\": " +
                                 std::to_string(proposal)});
    }
    for (const auto& s : sections()) {
        if (section && *section != s.name)
            continue;
        if (!config.contains(s.name))
            continue;
        const json& given = config.at(s.name);
        if (!given.is_object()) {
            d.push_back({s.name, "must be an object"});
            continue;
        }
        const std::size_t before = d.size();
        check_object(s.fields, s.name, given, d);
        if (d.size() == before)
            cross_checks(s.name, section_with_defaults(s, given), d);
    }
    if (section && !find_section(*section))
        d.push_back({"(command)", "unknown subcommand " + *section});
    return d;
}

json resolve_config(const json& config, const std::string& section)
{
    const SectionSpec* spec = find_section(section);
    if (!spec)
        throw ValidationError("unknown subcommand " + section);
    json out = json::object();
    for (const auto& f : global_fields())
        out[f.name] = config.contains(f.name) ? config.at(f.name) : f.fallback;
    out[section] = section_with_defaults(*spec, config.value(section, json::object()));
    return out;
}

void apply_override(json& config, std::string_view assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0)
        throw ValidationError("--set expects key=value (got '" + std::string(assignment) + "')");
    const std::string key(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded())
        value = text;
    json* node = &config;
    std::stringstream parts(key);
    std::string part;
    std::vector<std::string> path;
    while (std::getline(parts, part, '.')) {
        if (part.empty())
            throw ValidationError("--set: empty path component in '" + key + "'");
        path.push_back(part);
    }
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        json& next = (*node)[path[i]];
        if (next.is_null())
            next = json::object();
        if (!next.is_object())
            throw ValidationError("--set: '" + path[i] + "' is not an object");
        node = &next;
    }
    (*node)[path.back()] = value;
}

} // namespace hsk::cli
