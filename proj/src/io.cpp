#include "gddm/io.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>
#include <unistd.h>

namespace gddm {

namespace {

void require_object(const Json& j, const std::string& context)
{
    if (!j.is_object()) throw ValidationError(context + ": expected a JSON object");
}

const Json& require_key(const Json& j, std::string_view key, const std::string& context)
{
    require_object(j, context);
    const auto it = j.find(key);
    if (it == j.end()) throw ValidationError(context + ": missing key '" + std::string(key) + "'");
    return *it;
}

std::string get_string(const Json& j, std::string_view key, const std::string& context)
{
    const Json& v = require_key(j, key, context);
    if (!v.is_string())
        throw ValidationError(context + ": '" + std::string(key) + "' must be a string");
    return v.get<std::string>();
}

Json density_to_json(const ContinuousDensity& density)
{
    if (!density.form)
        throw ValidationError("initial density has no parametric form and cannot be serialized");
    const DensityForm& f = *density.form;
    Json j;
    if (f.kind == DensityForm::Kind::uniform) {
        j = {{"type", "uniform"}, {"lower", f.lower}, {"upper", f.upper}, {"mass", f.mass}};
    } else {
        j = {{"type", "beta"}, {"alpha", f.alpha}, {"beta", f.beta},  {"lower", f.lower},
             {"upper", f.upper}, {"mass", f.mass}};
    }
    return j;
}

ContinuousDensity density_from_json(const Json& j, const std::string& type)
{
    const std::string ctx = "initial (" + type + ")";
    if (type == "uniform") {
        require_known_keys(j, {"type", "lower", "upper", "mass"}, ctx);
        return ContinuousDensity::uniform(get_number(j, "lower", ctx), get_number(j, "upper", ctx),
                                          get_number_or(j, "mass", 1.0, ctx));
    }
    if (type == "beta") {
        require_known_keys(j, {"type", "alpha", "beta", "lower", "upper", "mass"}, ctx);
        return ContinuousDensity::beta(get_number(j, "alpha", ctx), get_number(j, "beta", ctx),
                                       get_number_or(j, "lower", 0.0, ctx),
                                       get_number_or(j, "upper", 1.0, ctx),
                                       get_number_or(j, "mass", 1.0, ctx));
    }
    throw ValidationError("unknown initial density type '" + type + "'");
}

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> fields;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& text, const std::string& context)
{
    double value = 0.0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end)
        throw ValidationError(context + ": '" + text + "' is not a number");
    return value;
}

Json design_to_json(const TrialRecord& trial)
{
    if (const auto* cov = std::get_if<AddmCovariates>(&trial.design)) {
        Json fix = Json::array();
        for (const auto& seg : cov->fixations)
            fix.push_back({{"duration", seg.duration}, {"label", to_string(seg.label)}});
        return {{"fixations", fix}, {"ratings", {{"r_A", cov->rating_a}, {"r_B", cov->rating_b}}}};
    }
    return {{"schedule", schedule_to_json(std::get<StageSchedule>(trial.design))}};
}

std::variant<AddmCovariates, StageSchedule> design_from_json(const Json& j,
                                                             const std::string& context)
{
    require_known_keys(j, {"fixations", "ratings", "schedule"}, context);
    if (j.contains("schedule")) {
        if (j.contains("fixations") || j.contains("ratings"))
            throw ValidationError(context + ": give either a schedule or fixations and ratings");
        return schedule_from_json(j.at("schedule"));
    }
    AddmCovariates cov;
    const Json& fix = require_key(j, "fixations", context);
    if (!fix.is_array() || fix.empty())
        throw ValidationError(context + ": 'fixations' must be a nonempty array");
    for (const Json& seg : fix) {
        require_known_keys(seg, {"duration", "label"}, context + " fixation");
        const double d = get_number(seg, "duration", context + " fixation");
        if (!(d > 0.0)) throw ValidationError(context + ": fixation durations must be positive");
        cov.fixations.push_back({d, parse_fixation(get_string(seg, "label", context))});
    }
    const Json& ratings = require_key(j, "ratings", context);
    require_known_keys(ratings, {"r_A", "r_B"}, context + " ratings");
    cov.rating_a = get_number(ratings, "r_A", context + " ratings");
    cov.rating_b = get_number(ratings, "r_B", context + " ratings");
    return cov;
}

}  // namespace

std::string format_double(double value)
{
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

Json parse_json(std::string_view text, const std::string& source)
{
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        // The library message already carries line and column.
        throw ValidationError(source + ": " + e.what());
    }
}

Json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_json(buf.str(), path.string());
}

void require_known_keys(const Json& object, std::initializer_list<std::string_view> allowed,
                        const std::string& context)
{
    require_object(object, context);
    for (const auto& [key, value] : object.items()) {
        bool known = false;
        for (auto a : allowed) known = known || key == a;
        if (!known) throw ValidationError(context + ": unknown key '" + key + "'");
    }
}

double get_number(const Json& object, std::string_view key, const std::string& context)
{
    const Json& v = require_key(object, key, context);
    if (!v.is_number())
        throw ValidationError(context + ": '" + std::string(key) + "' must be a number");
    return v.get<double>();
}

double get_number_or(const Json& object, std::string_view key, double fallback,
                     const std::string& context)
{
    require_object(object, context);
    return object.contains(key) ? get_number(object, key, context) : fallback;
}

std::vector<double> get_numbers(const Json& object, std::string_view key,
                                const std::string& context)
{
    const Json& v = require_key(object, key, context);
    if (!v.is_array())
        throw ValidationError(context + ": '" + std::string(key) + "' must be an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const Json& x : v) {
        if (!x.is_number())
            throw ValidationError(context + ": '" + std::string(key) + "' must hold numbers only");
        out.push_back(x.get<double>());
    }
    return out;
}

Json initial_to_json(const InitialCondition& initial)
{
    const std::vector<double> points(initial.points().begin(), initial.points().end());
    const std::vector<double> weights(initial.weights().begin(), initial.weights().end());
    if (initial.is_point_mass() && weights[0] == 1.0)
        return {{"type", "point"}, {"x0", points[0]}};
    if (!initial.density()) return {{"type", "discrete"}, {"points", points}, {"weights", weights}};
    if (!initial.has_discrete_part()) return density_to_json(*initial.density());
    return {{"type", "mixture"},
            {"points", points},
            {"weights", weights},
            {"density", density_to_json(*initial.density())}};
}

InitialCondition initial_from_json(const Json& j)
{
    const std::string type = get_string(j, "type", "initial");
    const std::string ctx = "initial (" + type + ")";
    if (type == "point") {
        require_known_keys(j, {"type", "x0"}, ctx);
        return InitialCondition::point(get_number(j, "x0", ctx));
    }
    if (type == "discrete") {
        require_known_keys(j, {"type", "points", "weights"}, ctx);
        return InitialCondition::discrete(get_numbers(j, "points", ctx),
                                          get_numbers(j, "weights", ctx));
    }
    if (type == "mixture") {
        require_known_keys(j, {"type", "points", "weights", "density"}, ctx);
        const Json& d = require_key(j, "density", ctx);
        return InitialCondition::mixture(get_numbers(j, "points", ctx),
                                         get_numbers(j, "weights", ctx),
                                         density_from_json(d, get_string(d, "type", ctx)));
    }
    return InitialCondition::continuous(density_from_json(j, type));
}

Json schedule_to_json(const StageSchedule& s)
{
    const auto uv = s.upper.values();
    const auto lv = s.lower.values();
    return {{"breakpoints", s.breakpoints},
            {"mu", s.mu},
            {"sigma", s.sigma},
            {"upper_values", std::vector<double>(uv.begin(), uv.end())},
            {"lower_values", std::vector<double>(lv.begin(), lv.end())},
            {"initial", initial_to_json(s.initial)}};
}

StageSchedule schedule_from_json(const Json& j)
{
    const std::string ctx = "schedule";
    require_known_keys(j, {"breakpoints", "mu", "sigma", "upper_values", "lower_values", "initial"},
                       ctx);
    StageSchedule s = StageSchedule::make(
        get_numbers(j, "breakpoints", ctx), get_numbers(j, "mu", ctx), get_numbers(j, "sigma", ctx),
        get_numbers(j, "upper_values", ctx), get_numbers(j, "lower_values", ctx),
        initial_from_json(require_key(j, "initial", ctx)));
    require_valid(s);
    return s;
}

Json addm_params_to_json(const AddmParams& p)
{
    return {{"eta", p.eta}, {"kappa", p.kappa}, {"a", p.a}, {"b", p.b}, {"x0", p.x0}};
}

AddmParams addm_params_from_json(const Json& j, const AddmParams& fallback)
{
    const std::string ctx = "aDDM parameters";
    require_known_keys(j, {"eta", "kappa", "a", "b", "x0"}, ctx);
    AddmParams p;
    p.eta = get_number_or(j, "eta", fallback.eta, ctx);
    p.kappa = get_number_or(j, "kappa", fallback.kappa, ctx);
    p.a = get_number_or(j, "a", fallback.a, ctx);
    p.b = get_number_or(j, "b", fallback.b, ctx);
    p.x0 = get_number_or(j, "x0", fallback.x0, ctx);
    p.validate();
    return p;
}

void write_trials(std::span<const TrialRecord> trials, const std::filesystem::path& csv_path,
                  const std::filesystem::path& sidecar_path)
{
    std::ostringstream csv;
    csv << "trial_id,rt,choice\n";
    Json designs = Json::object();
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const std::string id = std::to_string(i);
        if (const auto* r = std::get_if<Response>(&trials[i].observation))
            csv << id << ',' << format_double(r->time) << ',' << to_string(r->boundary) << '\n';
        else
            csv << id << ",,none\n";
        designs[id] = design_to_json(trials[i]);
    }
    write_file_atomic(csv_path, csv.str());
    write_file_atomic(sidecar_path, Json{{"trials", designs}}.dump() + "\n");
}

std::vector<TrialRecord> read_trials(const std::filesystem::path& csv_path,
                                     const std::filesystem::path& sidecar_path)
{
    const Json sidecar = read_json_file(sidecar_path);
    require_known_keys(sidecar, {"trials"}, sidecar_path.string());
    const Json& designs = require_key(sidecar, "trials", sidecar_path.string());
    require_object(designs, sidecar_path.string() + " trials");

    std::ifstream in(csv_path);
    if (!in) throw ValidationError("cannot open " + csv_path.string());
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"trial_id", "rt", "choice"})
        throw ValidationError(csv_path.string() + ":1: header must be trial_id,rt,choice");

    std::vector<TrialRecord> trials;
    for (int line_no = 2; std::getline(in, line); ++line_no) {
        if (line.empty()) continue;
        const std::string where = csv_path.string() + ":" + std::to_string(line_no);
        const auto fields = split_csv_line(line);
        if (fields.size() != 3) throw ValidationError(where + ": expected 3 fields");
        const auto it = designs.find(fields[0]);
        if (it == designs.end())
            throw ValidationError(where + ": trial '" + fields[0] + "' has no sidecar entry");
        TrialRecord trial;
        trial.design = design_from_json(*it, "trial " + fields[0]);
        if (fields[2] == "none") {
            if (!fields[1].empty()) throw ValidationError(where + ": non-response must have empty rt");
            trial.observation = NonResponse{};
        } else {
            Response r;
            try {
                r.boundary = parse_boundary_label(fields[2]);
            } catch (const std::exception&) {
                throw ValidationError(where + ": choice must be upper, lower or none");
            }
            r.time = parse_double(fields[1], where);
            if (!(r.time > 0.0)) throw ValidationError(where + ": rt must be positive");
            trial.observation = r;
        }
        trials.push_back(std::move(trial));
    }
    return trials;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents)
{
    std::filesystem::path tmp = path;
    tmp += ".tmp" + std::to_string(::getpid());
    if (path.has_parent_path()) {
        std::error_code dir_ec;
        std::filesystem::create_directories(path.parent_path(), dir_ec);
    }
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot write " + tmp.string());
        out.write(contents.data(), std::streamsize(contents.size()));
        out.flush();
        if (!out) throw ValidationError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw ValidationError("cannot move output into place at " + path.string() + ": " +
                              ec.message());
    }
}

Json RunManifest::to_json() const
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return {{"command", command},
            {"config_path", config_path},
            {"seed", seed},
            {"threads", threads},
            {"wall_clock_seconds", wall_clock_seconds},
            {"finished_at", stamp},
            {"outputs", outputs},
            {"settings", settings},
            {"versions",
             {{"gddm", library_version()},
              {"compiler", __VERSION__},
              {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}}};
}

void RunManifest::write_next_to(const std::filesystem::path& output) const
{
    std::filesystem::path path = output;
    path += ".manifest.json";
    write_file_atomic(path, to_json().dump(2) + "\n");
}

std::string library_version() { return "0.1.0"; }

}  // namespace gddm
