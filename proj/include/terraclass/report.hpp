#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "terraclass/attributes.hpp"
#include "terraclass/errors.hpp"
#include "terraclass/raster.hpp"
#include "terraclass/rules.hpp"
#include "terraclass/segmentation.hpp"
#include "terraclass/textio.hpp"

namespace terraclass {

// Per-feature area statistics. mean_area is rounded to 2 decimals; the other
// fields keep full precision.
struct FeatureStats {
    std::string feature_name;
    std::int64_t feature_count = 0;
    double total_area = 0.0;
    double mean_area = 0.0;
    double min_area = 0.0;
    double max_area = 0.0;
};

namespace detail {

inline double round2(double v) { return std::round(v * 100.0) / 100.0; }

inline std::string fmt_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

// Integral values print as integers; everything else as the shortest
// round-trip decimal.
inline std::string fmt_area(double v) {
    if (std::abs(v) < 9.007199254740992e15 && v == std::floor(v)) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
        return buf;
    }
    return format_double(v);
}

// Mean areas mirror the mixed precision of the performance table: two
// decimals with trailing zeros trimmed.
inline std::string fmt_mean(double v) {
    std::string s = fmt_fixed(v, 2);
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

}  // namespace detail

// Groups assigned regions by feature and aggregates area statistics.
// feature_order fixes the row order (rule-set order in pipeline runs);
// features not listed follow in order of first appearance. Unclassified
// regions are excluded.
inline std::vector<FeatureStats> feature_statistics(
    const std::vector<ObjectAssignment>& assignments,
    const std::vector<RegionAttributes>& attrs_list,
    const std::vector<std::string>& feature_order = {}) {
    if (assignments.size() != attrs_list.size())
        throw data_error("feature_statistics: assignments and attributes differ in length");
    std::vector<std::string> order;
    for (const auto& name : feature_order)
        if (std::find(order.begin(), order.end(), name) == order.end()) order.push_back(name);
    for (const auto& a : assignments)
        if (a.feature_name != kUnclassified &&
            std::find(order.begin(), order.end(), a.feature_name) == order.end())
            order.push_back(a.feature_name);

    std::vector<FeatureStats> out;
    for (const auto& name : order) {
        FeatureStats fs;
        fs.feature_name = name;
        for (std::size_t i = 0; i < assignments.size(); ++i) {
            if (assignments[i].feature_name != name) continue;
            if (assignments[i].region_id != attrs_list[i].region_id)
                throw data_error("feature_statistics: region id mismatch between tables");
            double area = attrs_list[i].area;
            if (fs.feature_count == 0) {
                fs.min_area = fs.max_area = area;
            } else {
                fs.min_area = std::min(fs.min_area, area);
                fs.max_area = std::max(fs.max_area, area);
            }
            fs.total_area += area;
            fs.feature_count += 1;
        }
        if (fs.feature_count == 0) continue;  // listed in order but never assigned
        fs.mean_area = detail::round2(fs.total_area / static_cast<double>(fs.feature_count));
        out.push_back(std::move(fs));
    }
    return out;
}

// Band wavelength table for `info` and reports.
inline std::string band_table(const RasterHeader& header) {
    std::ostringstream out;
    out << "TABLE I\n";
    out << "S. No.\tNo. of Bands\tValue\n";
    for (int b = 0; b < header.nbands; ++b) {
        out << (b + 1) << "\tBand " << (b + 1) << "\t";
        if (!header.wavelengths.empty())
            out << detail::fmt_fixed(header.wavelengths[b], 4);
        else
            out << "-";
        out << "\n";
    }
    return out.str();
}

inline std::string feature_table(const std::vector<FeatureStats>& stats) {
    std::ostringstream out;
    out << "TABLE II\n";
    out << "Feature Name\tFeature Count\tTotal Area\tMean Area\tMin Area\tMax Area\n";
    for (const auto& fs : stats) {
        out << fs.feature_name << "\t" << fs.feature_count << "\t"
            << detail::fmt_area(fs.total_area) << "\t" << detail::fmt_mean(fs.mean_area) << "\t"
            << detail::fmt_area(fs.min_area) << "\t" << detail::fmt_area(fs.max_area) << "\n";
    }
    return out.str();
}

// Everything a finished run contributes to its report. Optional sections are
// dropped when the corresponding stage did not run.
struct RunInfo {
    std::string file_name;
    std::optional<SegmentParams> segment_params;
    bool attributes_computed = false;
    std::string classification;  // "Rule-Based", "Maximum Likelihood", ... or "" for none
    std::optional<RuleSet> ruleset;
    std::optional<std::string> vector_output_dir;
    std::vector<std::string> feature_names;  // for the Feature Info block
    std::optional<RasterHeader> header;      // band table source
    std::vector<FeatureStats> feature_stats;
    std::optional<std::int64_t> unclassified_regions;
    struct FuzzyFitInfo {
        int iterations = 0;
        bool converged = false;
        double final_delta = 0.0;
    };
    std::optional<FuzzyFitInfo> fuzzy_fit;
};

namespace detail {

inline std::string rule_condition_text(const std::string& attr, const MembershipFunction& fn) {
    using C = MembershipFunction::Comparator;
    std::ostringstream out;
    out << attr << " ";
    switch (fn.comparator) {
        case C::less_than: out << "< " << fmt_fixed(fn.threshold_low, 4); break;
        case C::greater_than: out << "> " << fmt_fixed(fn.threshold_low, 4); break;
        case C::in_range:
            out << "[" << fmt_fixed(fn.threshold_low, 4) << ", "
                << fmt_fixed(fn.threshold_high, 4) << "]";
            break;
    }
    return out.str();
}

}  // namespace detail

inline std::string rule_listing(const RuleSet& ruleset) {
    std::ostringstream out;
    for (std::size_t i = 0; i < ruleset.rules.size(); ++i) {
        const auto& rule = ruleset.rules[i];
        out << " " << (i + 1) << ". (" << detail::fmt_fixed(rule.weight, 3) << "): If ";
        for (std::size_t c = 0; c < rule.conditions.size(); ++c) {
            if (c) out << " and ";
            out << detail::rule_condition_text(rule.conditions[c].first,
                                               rule.conditions[c].second);
        }
        out << ", then object belongs to \"" << rule.feature_name << "\".\n";
    }
    return out.str();
}

// Deterministic plain-text run report: parameter echo, rule listing, export
// options, smoothing, then the band and per-feature statistics tables.
inline std::string run_report(const RunInfo& info) {
    std::ostringstream out;
    out << "File Name: " << info.file_name << "\n";
    if (info.segment_params) {
        const auto& p = *info.segment_params;
        out << "Segment Scale Level: " << detail::fmt_fixed(p.scale_level, 1) << "\n";
        out << "Merge Level: " << detail::fmt_fixed(p.merge_level, 1) << "\n";
        if (p.refine_range)
            out << "Refine: " << detail::fmt_fixed(p.refine_range->first, 5) << " to "
                << detail::fmt_fixed(p.refine_range->second, 5) << "\n";
    }
    if (info.attributes_computed) {
        out << "Attributes Computed:\n";
        out << " Spatial\n Spectral\n Texture\n";
    }
    out << "Classification: " << (info.classification.empty() ? "None" : info.classification)
        << "\n";
    if (info.ruleset) {
        out << "Rule Set:\n";
        out << rule_listing(*info.ruleset);
    }
    if (info.vector_output_dir || !info.feature_names.empty()) {
        out << "Export Options:\n";
        if (info.vector_output_dir) {
            out << " Vector Output Directory:\n";
            out << " " << *info.vector_output_dir << "\n";
        }
        if (!info.feature_names.empty()) {
            out << " Feature Info:\n";
            for (const auto& name : info.feature_names)
                out << " " << name << " Type: Polygon\n";
        }
    }
    if (info.segment_params)
        out << "Smoothing: Threshold of " << info.segment_params->smoothing_threshold << "\n";
    if (info.fuzzy_fit) {
        out << "Fuzzy Fit: "
            << (info.fuzzy_fit->converged ? "converged" : "not converged") << " after "
            << info.fuzzy_fit->iterations << " iteration"
            << (info.fuzzy_fit->iterations == 1 ? "" : "s")
            << " (max membership change " << format_double(info.fuzzy_fit->final_delta) << ")\n";
    }
    if (info.header && !info.header->wavelengths.empty()) {
        out << "\n" << band_table(*info.header);
    }
    if (!info.feature_stats.empty()) {
        out << "\n" << feature_table(info.feature_stats);
        if (info.unclassified_regions)
            out << "Unclassified Regions: " << *info.unclassified_regions << "\n";
    }
    return out.str();
}

}  // namespace terraclass
