#pragma once

// Scenario configuration: a flat key=value format with dotted sections
// (JSON with the same keys, flat or nested, is accepted as an alternative
// encoding). Unknown keys are rejected; missing keys take the documented
// defaults. A total traffic load is solved into the background load by
// subtracting the cohort's average training load.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedslice/fl_engine.hpp"
#include "fedslice/pon_model.hpp"
#include "fedslice/traffic_gen.hpp"

namespace fedslice {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConsistencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Scenario {
    PonConfig pon;
    FlTaskConfig task;
    double unit_bits = 12000;
    double coarse_unit_bits = 1e6;
    bool use_coarse = false;
    std::uint64_t seed = 1;
    // Exactly one of these drives the background source. A requested total
    // load is resolved against the cohort's training load; total 0 means no
    // background at all.
    std::optional<double> total_load;
    std::optional<double> background_load;
    std::string accuracy_trace_path;
    std::string out_dir = "out";

    /// Average training load of the cohort: sum of update bits per round over
    /// T_round at the uplink rate.
    double training_load() const {
        const auto cohort =
            select_cohort(make_population(pon, task), task.involvement_percent);
        double bits = 0.0;
        for (const auto& c : cohort)
            bits += c.update_bits;
        return bits / (task.t_round_s * pon.uplink_bps);
    }

    /// The background load the generator runs at, after solving a total load.
    double resolved_background_load() const {
        if (background_load)
            return *background_load;
        if (!total_load || *total_load == 0.0)
            return 0.0;
        const double train = training_load();
        const double bg = *total_load - train;
        if (bg < 0)
            throw ConsistencyError(
                "total_load " + std::to_string(*total_load) +
                " is below the training load " + std::to_string(train));
        return bg;
    }

    double effective_total_load() const {
        if (total_load)
            return *total_load;
        return *background_load + training_load();
    }

    BackgroundConfig background_config() const {
        BackgroundConfig bg;
        bg.load = resolved_background_load();
        bg.unit_bits = use_coarse ? coarse_unit_bits : unit_bits;
        bg.seed = seed;
        return bg;
    }

    void validate() const {
        pon.validate();
        task.validate();
        if (total_load && background_load)
            throw ConsistencyError("set either traffic.total_load or "
                                   "traffic.background_load, not both");
        (void)resolved_background_load();
        background_config().validate();
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a])))
        ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])))
        --b;
    return s.substr(a, b - a);
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size())
            throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ParseError("bad numeric value for key `" + key + "`: " + v);
    }
}

inline int parse_int(const std::string& key, const std::string& v) {
    const double d = parse_double(key, v);
    if (d != std::floor(d))
        throw ParseError("expected integer for key `" + key + "`: " + v);
    return static_cast<int>(d);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1")
        return true;
    if (v == "false" || v == "0")
        return false;
    throw ParseError("expected bool for key `" + key + "`: " + v);
}

inline void flatten_json(const nlohmann::json& node, const std::string& prefix,
                         std::map<std::string, std::string>& out) {
    if (node.is_object()) {
        for (auto it = node.begin(); it != node.end(); ++it)
            flatten_json(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(),
                         out);
        return;
    }
    if (node.is_string())
        out[prefix] = node.get<std::string>();
    else if (node.is_boolean())
        out[prefix] = node.get<bool>() ? "true" : "false";
    else if (node.is_number()) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.17g", node.get<double>());
        out[prefix] = buf;
    } else
        throw ParseError("unsupported JSON value at key `" + prefix + "`");
}

}  // namespace detail

/// Applies one key to the scenario; throws ParseError on unknown keys.
inline void apply_config_key(Scenario& sc, const std::string& key,
                             const std::string& value) {
    using detail::parse_bool;
    using detail::parse_double;
    using detail::parse_int;
    if (key == "pon.num_onus")
        sc.pon.num_onus = parse_int(key, value);
    else if (key == "pon.uplink_bps")
        sc.pon.uplink_bps = parse_double(key, value);
    else if (key == "pon.downlink_bps")
        sc.pon.downlink_bps = parse_double(key, value);
    else if (key == "pon.distance_km")
        sc.pon.uniform_distance_km = parse_double(key, value);
    else if (key == "pon.prop_delay_s_per_km")
        sc.pon.prop_delay_s_per_km = parse_double(key, value);
    else if (key == "pon.polling_cycle_s")
        sc.pon.polling_cycle_s = parse_double(key, value);
    else if (key == "pon.guard_time_s")
        sc.pon.guard_time_s = parse_double(key, value);
    else if (key == "pon.downlink_broadcast_fraction")
        sc.pon.downlink_broadcast_fraction = parse_double(key, value);
    else if (key == "traffic.total_load")
        sc.total_load = parse_double(key, value);
    else if (key == "traffic.background_load")
        sc.background_load = parse_double(key, value);
    else if (key == "traffic.unit_bits")
        sc.unit_bits = parse_double(key, value);
    else if (key == "traffic.coarse_unit_bits")
        sc.coarse_unit_bits = parse_double(key, value);
    else if (key == "traffic.coarse")
        sc.use_coarse = parse_bool(key, value);
    else if (key == "traffic.seed")
        sc.seed = static_cast<std::uint64_t>(parse_double(key, value));
    else if (key == "fl.policy") {
        if (value == "fcfs" || value == "FCFS")
            sc.task.policy = Policy::Fcfs;
        else if (value == "bs" || value == "BS")
            sc.task.policy = Policy::Bs;
        else
            throw ParseError("fl.policy must be fcfs or bs, got " + value);
    } else if (key == "fl.rounds")
        sc.task.total_rounds = sc.task.h + parse_int(key, value);
    else if (key == "fl.h") {
        const int post = sc.task.total_rounds - sc.task.h;
        sc.task.h = parse_int(key, value);
        sc.task.total_rounds = sc.task.h + post;
    } else if (key == "fl.t_round_s")
        sc.task.t_round_s = parse_double(key, value);
    else if (key == "fl.model_bits")
        sc.task.model_bits = parse_double(key, value);
    else if (key == "fl.t_aggregation_s")
        sc.task.t_aggregation_s = parse_double(key, value);
    else if (key == "fl.involvement_percent")
        sc.task.involvement_percent = parse_double(key, value);
    else if (key == "fl.compute_lo_s")
        sc.task.compute_lo_s = parse_double(key, value);
    else if (key == "fl.compute_hi_s")
        sc.task.compute_hi_s = parse_double(key, value);
    else if (key == "fl.compute_jitter")
        sc.task.compute_jitter_frac = parse_double(key, value);
    else if (key == "fl.clients_per_onu")
        sc.task.clients_per_onu = parse_int(key, value);
    else if (key == "fl.strict_feasibility")
        sc.task.strict_feasibility = parse_bool(key, value);
    else if (key == "fl.accuracy_trace")
        sc.accuracy_trace_path = value;
    else if (key == "out.dir")
        sc.out_dir = value;
    else
        throw ParseError("unknown config key `" + key + "`");
}

/// Parses the key=value text form (`#` starts a comment) or, when the first
/// non-space character is `{`, the JSON form.
inline Scenario parse_config_text(const std::string& text) {
    Scenario sc;
    const std::string stripped = detail::trim(text);
    if (!stripped.empty() && stripped.front() == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(stripped);
        } catch (const std::exception& e) {
            throw ParseError(std::string("JSON parse failed: ") + e.what());
        }
        std::map<std::string, std::string> kv;
        detail::flatten_json(j, "", kv);
        // fl.h must apply before fl.rounds (rounds counts post-activation).
        if (auto it = kv.find("fl.h"); it != kv.end()) {
            apply_config_key(sc, it->first, it->second);
            kv.erase(it);
        }
        for (const auto& [k, v] : kv)
            apply_config_key(sc, k, v);
        sc.validate();
        return sc;
    }

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::optional<std::string> pending_rounds;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ParseError("line " + std::to_string(lineno) + ": empty key or value");
        try {
            if (key == "fl.rounds") {
                pending_rounds = value;  // applied after fl.h, order-independent
                continue;
            }
            apply_config_key(sc, key, value);
        } catch (ParseError& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (pending_rounds)
        apply_config_key(sc, "fl.rounds", *pending_rounds);
    sc.validate();
    return sc;
}

inline Scenario parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// Canonical fully-resolved echo of a scenario; parse_config_text on the echo
/// reproduces the scenario. Doubles print with %.17g so they round-trip.
inline std::string echo_config(const Scenario& sc) {
    std::ostringstream out;
    auto put_d = [&](const char* key, double v) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << key << " = " << buf << "\n";
    };
    auto put_i = [&](const char* key, long long v) { out << key << " = " << v << "\n"; };
    auto put_b = [&](const char* key, bool v) {
        out << key << " = " << (v ? "true" : "false") << "\n";
    };
    if (!sc.accuracy_trace_path.empty())
        out << "fl.accuracy_trace = " << sc.accuracy_trace_path << "\n";
    put_d("fl.compute_hi_s", sc.task.compute_hi_s);
    put_d("fl.compute_jitter", sc.task.compute_jitter_frac);
    put_d("fl.compute_lo_s", sc.task.compute_lo_s);
    put_i("fl.clients_per_onu", sc.task.clients_per_onu);
    put_i("fl.h", sc.task.h);
    put_d("fl.involvement_percent", sc.task.involvement_percent);
    put_d("fl.model_bits", sc.task.model_bits);
    out << "fl.policy = " << to_string(sc.task.policy) << "\n";
    put_i("fl.rounds", sc.task.total_rounds - sc.task.h);
    put_b("fl.strict_feasibility", sc.task.strict_feasibility);
    put_d("fl.t_aggregation_s", sc.task.t_aggregation_s);
    put_d("fl.t_round_s", sc.task.t_round_s);
    put_i("pon.num_onus", sc.pon.num_onus);
    put_d("pon.distance_km", sc.pon.uniform_distance_km);
    put_d("pon.downlink_bps", sc.pon.downlink_bps);
    put_d("pon.downlink_broadcast_fraction", sc.pon.downlink_broadcast_fraction);
    put_d("pon.guard_time_s", sc.pon.guard_time_s);
    put_d("pon.polling_cycle_s", sc.pon.polling_cycle_s);
    put_d("pon.prop_delay_s_per_km", sc.pon.prop_delay_s_per_km);
    put_d("pon.uplink_bps", sc.pon.uplink_bps);
    if (sc.background_load)
        put_d("traffic.background_load", *sc.background_load);
    put_b("traffic.coarse", sc.use_coarse);
    put_d("traffic.coarse_unit_bits", sc.coarse_unit_bits);
    put_i("traffic.seed", static_cast<long long>(sc.seed));
    if (sc.total_load)
        put_d("traffic.total_load", *sc.total_load);
    put_d("traffic.unit_bits", sc.unit_bits);
    out << "out.dir = " << sc.out_dir << "\n";
    return out.str();
}

}  // namespace fedslice
