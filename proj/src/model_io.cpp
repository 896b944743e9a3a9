#include "blev/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace blev {
namespace io {

using nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ModelError(where + ": " + what);
}

void reject_unknown(const ordered_json& obj, const std::string& where,
                    std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed)
            if (it.key() == a) { ok = true; break; }
        if (!ok) fail(where, "unknown field \"" + it.key() + "\"");
    }
}

double get_number(const ordered_json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key)) fail(where, std::string("missing field \"") + key + "\"");
    if (!obj[key].is_number()) fail(where, std::string("field \"") + key + "\" must be a number");
    return obj[key].get<double>();
}

std::string get_variant(const ordered_json& obj, const std::string& where) {
    if (!obj.is_object()) fail(where, "must be an object");
    if (!obj.contains("variant")) fail(where, "missing field \"variant\"");
    if (!obj["variant"].is_string()) fail(where, "field \"variant\" must be a string");
    return obj["variant"].get<std::string>();
}

JumpLaw parse_jump_law(const ordered_json& obj, const std::string& where) {
    const std::string v = get_variant(obj, where);
    if (v == "none") {
        reject_unknown(obj, where, {"variant"});
        return JumpNone{};
    }
    if (v == "gaussian") {
        reject_unknown(obj, where, {"variant", "mean", "sd"});
        return JumpGaussian{get_number(obj, where, "mean"), get_number(obj, where, "sd")};
    }
    if (v == "two_sided_exponential") {
        reject_unknown(obj, where, {"variant", "prob_plus", "rate_plus", "rate_minus"});
        return TwoSidedExponential{get_number(obj, where, "prob_plus"),
                                   get_number(obj, where, "rate_plus"),
                                   get_number(obj, where, "rate_minus")};
    }
    if (v == "point_masses") {
        reject_unknown(obj, where, {"variant", "points"});
        if (!obj.contains("points") || !obj["points"].is_array())
            fail(where, "field \"points\" must be an array");
        JumpPointMasses pm;
        for (const auto& e : obj["points"]) {
            const std::string pw = where + ".points[]";
            if (!e.is_object()) fail(pw, "must be an object");
            reject_unknown(e, pw, {"location", "weight"});
            pm.points.push_back({get_number(e, pw, "location"), get_number(e, pw, "weight")});
        }
        return pm;
    }
    fail(where, "unknown variant \"" + v + "\"");
}

CountLaw parse_count_law(const ordered_json& obj, const std::string& where) {
    const std::string v = get_variant(obj, where);
    if (v == "deterministic") {
        reject_unknown(obj, where, {"variant", "k"});
        const double k = get_number(obj, where, "k");
        if (k != std::floor(k) || k < 0.0) fail(where, "field \"k\" must be a nonnegative integer");
        return CountDeterministic{static_cast<std::uint64_t>(k)};
    }
    if (v == "geometric") {
        reject_unknown(obj, where, {"variant", "p"});
        return CountGeometric{get_number(obj, where, "p")};
    }
    if (v == "poisson_plus_one") {
        reject_unknown(obj, where, {"variant", "lambda"});
        return CountPoissonPlusOne{get_number(obj, where, "lambda")};
    }
    if (v == "zeta") {
        reject_unknown(obj, where, {"variant", "s"});
        return CountZeta{get_number(obj, where, "s")};
    }
    fail(where, "unknown variant \"" + v + "\"");
}

DisplacementLaw parse_displacement_law(const ordered_json& obj, const std::string& where) {
    const std::string v = get_variant(obj, where);
    if (v == "point_mass") {
        reject_unknown(obj, where, {"variant", "value"});
        return DispPointMass{get_number(obj, where, "value")};
    }
    if (v == "gaussian") {
        reject_unknown(obj, where, {"variant", "mean", "sd"});
        return DispGaussian{get_number(obj, where, "mean"), get_number(obj, where, "sd")};
    }
    if (v == "two_sided_exponential") {
        reject_unknown(obj, where, {"variant", "prob_plus", "rate_plus", "rate_minus"});
        return TwoSidedExponential{get_number(obj, where, "prob_plus"),
                                   get_number(obj, where, "rate_plus"),
                                   get_number(obj, where, "rate_minus")};
    }
    fail(where, "unknown variant \"" + v + "\"");
}

OffspringSpec parse_offspring(const ordered_json& obj, const std::string& where) {
    const std::string v = get_variant(obj, where);
    if (v == "local") {
        reject_unknown(obj, where, {"variant", "count"});
        if (!obj.contains("count")) fail(where, "missing field \"count\"");
        return OffspringLocal{parse_count_law(obj["count"], where + ".count")};
    }
    if (v == "iid_displaced") {
        reject_unknown(obj, where, {"variant", "count", "displacement"});
        if (!obj.contains("count")) fail(where, "missing field \"count\"");
        if (!obj.contains("displacement")) fail(where, "missing field \"displacement\"");
        return OffspringIidDisplaced{
            parse_count_law(obj["count"], where + ".count"),
            parse_displacement_law(obj["displacement"], where + ".displacement")};
    }
    if (v == "fixed_configuration") {
        reject_unknown(obj, where, {"variant", "points"});
        if (!obj.contains("points") || !obj["points"].is_array())
            fail(where, "field \"points\" must be an array of numbers");
        OffspringFixed fixed;
        for (const auto& e : obj["points"]) {
            if (!e.is_number()) fail(where, "field \"points\" must be an array of numbers");
            fixed.points.push_back(e.get<double>());
        }
        return fixed;
    }
    fail(where, "unknown variant \"" + v + "\"");
}

ordered_json jump_law_to_json(const JumpLaw& law) {
    ordered_json j;
    if (std::holds_alternative<JumpNone>(law)) {
        j["variant"] = "none";
    } else if (const auto* g = std::get_if<JumpGaussian>(&law)) {
        j["variant"] = "gaussian";
        j["mean"] = g->mean;
        j["sd"] = g->sd;
    } else if (const auto* e = std::get_if<TwoSidedExponential>(&law)) {
        j["variant"] = "two_sided_exponential";
        j["prob_plus"] = e->prob_plus;
        j["rate_plus"] = e->rate_plus;
        j["rate_minus"] = e->rate_minus;
    } else {
        const auto& pm = std::get<JumpPointMasses>(law);
        j["variant"] = "point_masses";
        j["points"] = ordered_json::array();
        for (const auto& p : pm.points)
            j["points"].push_back({{"location", p.location}, {"weight", p.weight}});
    }
    return j;
}

ordered_json count_law_to_json(const CountLaw& law) {
    ordered_json j;
    if (const auto* d = std::get_if<CountDeterministic>(&law)) {
        j["variant"] = "deterministic";
        j["k"] = d->k;
    } else if (const auto* g = std::get_if<CountGeometric>(&law)) {
        j["variant"] = "geometric";
        j["p"] = g->p;
    } else if (const auto* p = std::get_if<CountPoissonPlusOne>(&law)) {
        j["variant"] = "poisson_plus_one";
        j["lambda"] = p->lambda;
    } else {
        j["variant"] = "zeta";
        j["s"] = std::get<CountZeta>(law).s;
    }
    return j;
}

ordered_json displacement_to_json(const DisplacementLaw& law) {
    ordered_json j;
    if (const auto* p = std::get_if<DispPointMass>(&law)) {
        j["variant"] = "point_mass";
        j["value"] = p->value;
    } else if (const auto* g = std::get_if<DispGaussian>(&law)) {
        j["variant"] = "gaussian";
        j["mean"] = g->mean;
        j["sd"] = g->sd;
    } else {
        const auto& e = std::get<TwoSidedExponential>(law);
        j["variant"] = "two_sided_exponential";
        j["prob_plus"] = e.prob_plus;
        j["rate_plus"] = e.rate_plus;
        j["rate_minus"] = e.rate_minus;
    }
    return j;
}

} // namespace

BranchingModel model_from_json(const std::string& text) {
    ordered_json root;
    try {
        root = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // byte offset -> line/column anchor
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') { ++line; col = 1; } else { ++col; }
        }
        throw ModelError("model json: parse error at line " + std::to_string(line) +
                         ", column " + std::to_string(col) + ": " + e.what());
    }
    if (!root.is_object()) fail("model", "top level must be an object");
    reject_unknown(root, "model", {"beta", "motion", "offspring"});
    if (!root.contains("motion")) fail("model", "missing field \"motion\"");
    if (!root.contains("offspring")) fail("model", "missing field \"offspring\"");

    BranchingModel m;
    m.beta = get_number(root, "model", "beta");

    const auto& mo = root["motion"];
    if (!mo.is_object()) fail("model.motion", "must be an object");
    reject_unknown(mo, "model.motion", {"drift", "diffusion", "jump_rate", "jump_law"});
    m.motion.drift = get_number(mo, "model.motion", "drift");
    m.motion.diffusion = get_number(mo, "model.motion", "diffusion");
    m.motion.jump_rate = get_number(mo, "model.motion", "jump_rate");
    m.motion.jump_law = mo.contains("jump_law")
                            ? parse_jump_law(mo["jump_law"], "model.motion.jump_law")
                            : JumpLaw{JumpNone{}};

    m.offspring = parse_offspring(root["offspring"], "model.offspring");
    validate(m);
    return m;
}

BranchingModel load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open model file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

std::string model_to_json(const BranchingModel& m) {
    ordered_json j;
    j["beta"] = m.beta;
    j["motion"]["drift"] = m.motion.drift;
    j["motion"]["diffusion"] = m.motion.diffusion;
    j["motion"]["jump_rate"] = m.motion.jump_rate;
    j["motion"]["jump_law"] = jump_law_to_json(m.motion.jump_law);

    ordered_json off;
    if (const auto* local = std::get_if<OffspringLocal>(&m.offspring)) {
        off["variant"] = "local";
        off["count"] = count_law_to_json(local->count);
    } else if (const auto* iid = std::get_if<OffspringIidDisplaced>(&m.offspring)) {
        off["variant"] = "iid_displaced";
        off["count"] = count_law_to_json(iid->count);
        off["displacement"] = displacement_to_json(iid->displacement);
    } else {
        off["variant"] = "fixed_configuration";
        off["points"] = std::get<OffspringFixed>(m.offspring).points;
    }
    j["offspring"] = off;
    return j.dump(2) + "\n";
}

} // namespace io
} // namespace blev
