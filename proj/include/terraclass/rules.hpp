#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "terraclass/attributes.hpp"
#include "terraclass/errors.hpp"
#include "terraclass/textio.hpp"

namespace terraclass {

// Tolerance-controlled membership function over one attribute. Tolerance 0
// is the crisp indicator; a positive tolerance opens a symmetric ramp of
// half-width tau around the threshold, optionally smoothed (s_type).
struct MembershipFunction {
    enum class Shape { linear, s_type };
    enum class Comparator { less_than, greater_than, in_range };

    Shape shape = Shape::linear;
    Comparator comparator = Comparator::less_than;
    double threshold_low = 0.0;   // single threshold for lt/gt; low end for in_range
    double threshold_high = 0.0;  // high end for in_range
    double tolerance = 0.0;

    void validate() const {
        if (tolerance < 0.0) throw data_error("membership function: tolerance must be >= 0");
        if (comparator == Comparator::in_range && threshold_low > threshold_high)
            throw data_error("membership function: in_range needs low <= high");
    }
};

namespace detail {

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }
inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

inline double ramp_below(double v, double threshold, double tau, MembershipFunction::Shape shape) {
    double t = clamp01((threshold + tau - v) / (2.0 * tau));
    return shape == MembershipFunction::Shape::s_type ? smoothstep(t) : t;
}

inline double ramp_above(double v, double threshold, double tau, MembershipFunction::Shape shape) {
    double t = clamp01((v - threshold + tau) / (2.0 * tau));
    return shape == MembershipFunction::Shape::s_type ? smoothstep(t) : t;
}

}  // namespace detail

inline double membership(const MembershipFunction& fn, double value) {
    fn.validate();
    using C = MembershipFunction::Comparator;
    if (fn.tolerance == 0.0) {
        switch (fn.comparator) {
            case C::less_than: return value < fn.threshold_low ? 1.0 : 0.0;
            case C::greater_than: return value > fn.threshold_low ? 1.0 : 0.0;
            case C::in_range:
                return (value >= fn.threshold_low && value <= fn.threshold_high) ? 1.0 : 0.0;
        }
    }
    switch (fn.comparator) {
        case C::less_than: return detail::ramp_below(value, fn.threshold_low, fn.tolerance, fn.shape);
        case C::greater_than:
            return detail::ramp_above(value, fn.threshold_low, fn.tolerance, fn.shape);
        case C::in_range:
            return std::min(detail::ramp_above(value, fn.threshold_low, fn.tolerance, fn.shape),
                            detail::ramp_below(value, fn.threshold_high, fn.tolerance, fn.shape));
    }
    return 0.0;
}

struct FuzzyRule {
    std::string feature_name;
    double weight = 1.0;
    std::vector<std::pair<std::string, MembershipFunction>> conditions;

    void validate() const {
        if (!(weight > 0.0) || weight > 1.0)
            throw data_error("rule '" + feature_name + "': weight must lie in (0, 1]");
        if (conditions.empty())
            throw data_error("rule '" + feature_name + "': needs at least one condition");
        for (const auto& [attr, fn] : conditions) fn.validate();
    }
};

struct RuleSet {
    std::vector<FuzzyRule> rules;

    void validate() const {
        if (rules.empty()) throw data_error("rule set: needs at least one rule");
        for (const auto& r : rules) r.validate();
    }
};

// Attribute lookup by rule name: tx_mean, majaxislen, area, pixel_count, or
// avgband_<k> with 1-based k.
inline double attribute_value(const RegionAttributes& attrs, const std::string& name) {
    if (name == "tx_mean") return attrs.tx_mean;
    if (name == "majaxislen") return attrs.majaxislen;
    if (name == "area") return attrs.area;
    if (name == "pixel_count") return static_cast<double>(attrs.pixel_count);
    if (name.rfind("avgband_", 0) == 0) {
        long k = parse_long(name.substr(8), "avgband index");
        if (k >= 1 && k <= static_cast<long>(attrs.avgband.size()))
            return attrs.avgband[k - 1];
    }
    throw data_error("unknown attribute name '" + name + "'");
}

// Rule confidence: weight times the minimum condition membership.
inline double evaluate_rule(const FuzzyRule& rule, const RegionAttributes& attrs) {
    rule.validate();
    double lowest = 1.0;
    for (const auto& [attr, fn] : rule.conditions)
        lowest = std::min(lowest, membership(fn, attribute_value(attrs, attr)));
    return rule.weight * lowest;
}

struct ObjectAssignment {
    std::uint32_t region_id = 0;
    std::string feature_name;  // "unclassified" when no rule fires
    double confidence = 0.0;
};

struct ObjectClassification {
    std::vector<ObjectAssignment> assignments;      // one per region, ids ascending
    std::vector<std::vector<double>> confidence;    // [rule][region index]: the confidence maps
};

inline const std::string kUnclassified = "unclassified";

// Evaluates every rule on every region; each region goes to the feature of
// its maximum-confidence rule (ties to the earliest rule). Regions where all
// confidences are zero stay unclassified.
inline ObjectClassification classify_objects(const RuleSet& ruleset,
                                             const std::vector<RegionAttributes>& attrs_list) {
    ruleset.validate();
    ObjectClassification out;
    out.confidence.assign(ruleset.rules.size(), std::vector<double>(attrs_list.size(), 0.0));
    out.assignments.reserve(attrs_list.size());
    for (std::size_t j = 0; j < attrs_list.size(); ++j) {
        double best = 0.0;
        std::size_t best_rule = ruleset.rules.size();
        for (std::size_t i = 0; i < ruleset.rules.size(); ++i) {
            double c = evaluate_rule(ruleset.rules[i], attrs_list[j]);
            out.confidence[i][j] = c;
            if (c > best) {
                best = c;
                best_rule = i;
            }
        }
        ObjectAssignment a;
        a.region_id = attrs_list[j].region_id;
        if (best_rule == ruleset.rules.size()) {
            a.feature_name = kUnclassified;
            a.confidence = 0.0;
        } else {
            a.feature_name = ruleset.rules[best_rule].feature_name;
            a.confidence = best;
        }
        out.assignments.push_back(std::move(a));
    }
    return out;
}

// ---- persistence ----

namespace detail {

inline MembershipFunction::Shape parse_shape(const std::string& s) {
    if (s == "linear") return MembershipFunction::Shape::linear;
    if (s == "s_type") return MembershipFunction::Shape::s_type;
    throw data_error("rule document: unknown shape '" + s + "' (expected linear or s_type)");
}

inline std::string shape_name(MembershipFunction::Shape s) {
    return s == MembershipFunction::Shape::linear ? "linear" : "s_type";
}

}  // namespace detail

// Rule document:
// {"rules": [{"feature": ..., "weight": ..., "conditions": [
//    {"attr": ..., "op": "lt"|"gt"|"range", "threshold": ... or
//     "low"/"high": ..., "tolerance": ..., "shape": "linear"|"s_type"}]}]}
inline RuleSet parse_ruleset(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("rule document: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("rules") || !doc["rules"].is_array())
        throw data_error("rule document: expected object with a 'rules' array");
    RuleSet rs;
    for (const auto& entry : doc["rules"]) {
        FuzzyRule rule;
        rule.feature_name = entry.at("feature").get<std::string>();
        rule.weight = entry.at("weight").get<double>();
        if (!entry.contains("conditions") || !entry["conditions"].is_array())
            throw data_error("rule document: rule '" + rule.feature_name +
                             "' needs a 'conditions' array");
        for (const auto& cond : entry["conditions"]) {
            std::string attr = cond.at("attr").get<std::string>();
            MembershipFunction fn;
            std::string op = cond.at("op").get<std::string>();
            if (op == "lt") {
                fn.comparator = MembershipFunction::Comparator::less_than;
                fn.threshold_low = cond.at("threshold").get<double>();
            } else if (op == "gt") {
                fn.comparator = MembershipFunction::Comparator::greater_than;
                fn.threshold_low = cond.at("threshold").get<double>();
            } else if (op == "range") {
                fn.comparator = MembershipFunction::Comparator::in_range;
                fn.threshold_low = cond.at("low").get<double>();
                fn.threshold_high = cond.at("high").get<double>();
            } else {
                throw data_error("rule document: unknown op '" + op +
                                 "' (expected lt, gt, or range)");
            }
            fn.tolerance = cond.value("tolerance", 0.0);
            fn.shape = detail::parse_shape(cond.value("shape", "linear"));
            fn.validate();
            // Attribute names are checked against the known families here;
            // avgband indices are range-checked at evaluation time.
            if (attr != "tx_mean" && attr != "majaxislen" && attr != "area" &&
                attr != "pixel_count" && attr.rfind("avgband_", 0) != 0)
                throw data_error("rule document: unknown attribute '" + attr + "'");
            rule.conditions.emplace_back(attr, fn);
        }
        rs.rules.push_back(std::move(rule));
    }
    rs.validate();
    return rs;
}

inline RuleSet load_ruleset(const std::string& path) {
    return parse_ruleset(read_text_file(path));
}

inline void save_ruleset(const RuleSet& rs, const std::string& path) {
    nlohmann::json doc;
    auto& arr = doc["rules"] = nlohmann::json::array();
    for (const auto& rule : rs.rules) {
        nlohmann::json entry;
        entry["feature"] = rule.feature_name;
        entry["weight"] = rule.weight;
        auto& conds = entry["conditions"] = nlohmann::json::array();
        for (const auto& [attr, fn] : rule.conditions) {
            nlohmann::json c;
            c["attr"] = attr;
            using C = MembershipFunction::Comparator;
            if (fn.comparator == C::in_range) {
                c["op"] = "range";
                c["low"] = fn.threshold_low;
                c["high"] = fn.threshold_high;
            } else {
                c["op"] = fn.comparator == C::less_than ? "lt" : "gt";
                c["threshold"] = fn.threshold_low;
            }
            c["tolerance"] = fn.tolerance;
            c["shape"] = detail::shape_name(fn.shape);
            conds.push_back(std::move(c));
        }
        arr.push_back(std::move(entry));
    }
    write_file_atomic(path, doc.dump(2) + "\n");
}

// Assignment table: region_id <tab> feature <tab> confidence.
inline void save_assignments(const std::vector<ObjectAssignment>& assignments,
                             const std::string& path) {
    std::ostringstream out;
    out << "region_id\tfeature\tconfidence\n";
    for (const auto& a : assignments)
        out << a.region_id << "\t" << a.feature_name << "\t" << format_double(a.confidence)
            << "\n";
    write_file_atomic(path, out.str());
}

inline std::vector<ObjectAssignment> load_assignments(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line) || trim(line) != "region_id\tfeature\tconfidence")
        throw data_error(path + ": unexpected assignment table header");
    std::vector<ObjectAssignment> out;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto cells = split(line, '\t');
        if (cells.size() != 3) throw data_error(path + ": row with wrong column count");
        ObjectAssignment a;
        a.region_id = static_cast<std::uint32_t>(parse_long(cells[0], "region_id"));
        a.feature_name = cells[1];
        a.confidence = parse_double(cells[2], "confidence");
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace terraclass

