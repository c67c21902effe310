#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "terraclass/errors.hpp"
#include "terraclass/gaussian.hpp"
#include "terraclass/parallel.hpp"
#include "terraclass/raster.hpp"
#include "terraclass/roi.hpp"

namespace terraclass {

// Per-pixel, per-class membership grades in [0, 1], summing to 1 per pixel.
// Stored pixel-major: grades[pixel * nclasses + k].
struct MembershipMap {
    int nrows = 0;
    int ncols = 0;
    std::vector<std::string> class_table;
    std::vector<double> grades;

    int nclasses() const { return static_cast<int>(class_table.size()); }
    double grade(int row, int col, int k) const {
        return grades[(static_cast<std::size_t>(row) * ncols + col) * class_table.size() + k];
    }
};

struct FuzzyConfig {
    double m_exponent = 1.0;
    int max_iterations = 10;
    double epsilon = 1e-4;
    enum class EstimationSet { training_pixels_only, full_scene };
    EstimationSet estimation_set = EstimationSet::training_pixels_only;

    void validate() const {
        if (!(m_exponent >= 1.0)) throw data_error("fuzzy config: m exponent must be >= 1");
        if (max_iterations < 1) throw data_error("fuzzy config: max_iterations must be >= 1");
        if (!(epsilon > 0.0)) throw data_error("fuzzy config: epsilon must be positive");
    }
};

namespace detail {

inline double weight_pow(double mu, double m) { return m == 1.0 ? mu : std::pow(mu, m); }

}  // namespace detail

// Membership-weighted mean: V = sum_j mu_j^m x_j / sum_j mu_j^m.
inline Eigen::VectorXd fuzzy_mean(const std::vector<Eigen::VectorXd>& pixels,
                                  const std::vector<double>& memberships, double m = 1.0) {
    if (pixels.empty()) throw data_error("fuzzy_mean: no pixels");
    if (pixels.size() != memberships.size())
        throw data_error("fuzzy_mean: pixels and memberships differ in length");
    Eigen::VectorXd num = Eigen::VectorXd::Zero(pixels[0].size());
    double den = 0.0;
    for (std::size_t j = 0; j < pixels.size(); ++j) {
        double w = detail::weight_pow(memberships[j], m);
        num += w * pixels[j];
        den += w;
    }
    if (!(den > 0.0)) throw data_error("fuzzy_mean: all memberships are zero");
    return num / den;
}

struct FuzzyCovariance {
    Eigen::MatrixXd matrix;
    double ridge_used = 0.0;
};

// Membership-weighted scatter about the fuzzy mean, normalized by sum mu^m
// (N, not N-1, in the crisp limit), then regularized to positive definite.
inline FuzzyCovariance fuzzy_covariance(const std::vector<Eigen::VectorXd>& pixels,
                                        const std::vector<double>& memberships,
                                        const Eigen::VectorXd& mean, double m = 1.0) {
    if (pixels.empty()) throw data_error("fuzzy_covariance: no pixels");
    if (pixels.size() != memberships.size())
        throw data_error("fuzzy_covariance: pixels and memberships differ in length");
    Eigen::MatrixXd num = Eigen::MatrixXd::Zero(mean.size(), mean.size());
    double den = 0.0;
    for (std::size_t j = 0; j < pixels.size(); ++j) {
        double w = detail::weight_pow(memberships[j], m);
        Eigen::VectorXd d = pixels[j] - mean;
        num += w * (d * d.transpose());
        den += w;
    }
    if (!(den > 0.0)) throw data_error("fuzzy_covariance: all memberships are zero");
    FuzzyCovariance out;
    out.matrix = num / den;
    out.ridge_used = regularize_covariance(out.matrix);
    return out;
}

// Grade vector mu_k(x) = p_k f_k(x) / sum_i p_i f_i(x), evaluated in log
// space (max subtracted before exponentiation) so it is stable for extreme
// densities. Sums to 1 by construction.
inline Eigen::VectorXd membership_grades(const std::vector<GaussianClassModel>& models,
                                         const Eigen::VectorXd& x) {
    if (models.empty()) throw data_error("membership_grades: empty model list");
    std::vector<double> g;
    detail::discriminant_scores(models, x, g);
    double gmax = *std::max_element(g.begin(), g.end());
    Eigen::VectorXd grades(models.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        grades[i] = std::exp(g[i] - gmax);
        sum += grades[i];
    }
    return grades / sum;
}

// Sum of class-k grades over all pixels; the discrete fuzzy cardinality.
inline double fuzzy_cardinality(const MembershipMap& map, int k) {
    if (k < 0 || k >= map.nclasses()) throw data_error("fuzzy_cardinality: bad class index");
    double total = 0.0;
    std::size_t n = static_cast<std::size_t>(map.nrows) * map.ncols;
    for (std::size_t p = 0; p < n; ++p) total += map.grades[p * map.nclasses() + k];
    return total;
}

struct FuzzyFitResult {
    std::vector<GaussianClassModel> models;
    int iterations = 0;
    bool converged = false;
    double final_delta = 0.0;
};

namespace detail {

// Grade matrix over an explicit pixel list, one row of K grades per pixel,
// evaluated in parallel; row-major layout keeps results thread-count stable.
inline std::vector<double> grade_matrix(const std::vector<GaussianClassModel>& models,
                                        const std::vector<Eigen::VectorXd>& pixels,
                                        int threads) {
    std::vector<double> grades(pixels.size() * models.size());
    parallel_for(pixels.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            Eigen::VectorXd mu = membership_grades(models, pixels[j]);
            for (std::size_t k = 0; k < models.size(); ++k)
                grades[j * models.size() + k] = mu[k];
        }
    });
    return grades;
}

}  // namespace detail

// Alternating fuzzy re-estimation: crisp initialization from ROI statistics,
// then grade evaluation and fuzzy mean/covariance updates until the largest
// per-pixel membership change drops below epsilon or iterations run out.
// Priors are re-estimated as fuzzy cardinality fractions each pass.
// Non-convergence returns the last iterate, flagged in the result.
inline FuzzyFitResult fit_fuzzy(const Raster& raster, const TrainingSet& training,
                                const FuzzyConfig& config = {},
                                int threads = default_thread_count()) {
    config.validate();
    training.validate(raster.header);
    std::size_t k_count = training.classes.size();

    // Estimation pixels: the training union, or every pixel of the scene.
    std::vector<Eigen::VectorXd> pixels;
    if (config.estimation_set == FuzzyConfig::EstimationSet::training_pixels_only) {
        std::size_t total = 0;
        for (const auto& cls : training.classes) total += cls.pixels.size();
        pixels.reserve(total);
        for (const auto& cls : training.classes)
            for (const auto& p : cls.pixels) pixels.push_back(raster.pixel(p.row, p.col));
    } else {
        pixels.reserve(raster.header.pixel_count());
        for (int r = 0; r < raster.header.nrows; ++r)
            for (int c = 0; c < raster.header.ncols; ++c) pixels.push_back(raster.pixel(r, c));
    }

    // Crisp initialization, priors proportional to training pixel counts.
    std::size_t training_total = 0;
    for (const auto& cls : training.classes) training_total += cls.pixels.size();
    std::vector<GaussianClassModel> models;
    models.reserve(k_count);
    for (const auto& cls : training.classes) {
        ClassStats stats = estimate_class_stats(raster, cls.pixels);
        double prior = static_cast<double>(cls.pixels.size()) / training_total;
        models.emplace_back(cls.name, std::move(stats.mean), std::move(stats.covariance), prior,
                            stats.ridge_used);
    }

    FuzzyFitResult result;
    std::vector<double> prev = detail::grade_matrix(models, pixels, threads);
    std::vector<double> column(pixels.size());
    for (int it = 1; it <= config.max_iterations; ++it) {
        // Re-estimate each class from the current grades. Reductions run
        // sequentially in pixel order so results are bit-stable.
        std::vector<GaussianClassModel> next;
        next.reserve(k_count);
        std::vector<double> cardinality(k_count, 0.0);
        for (std::size_t k = 0; k < k_count; ++k) {
            for (std::size_t j = 0; j < pixels.size(); ++j) {
                column[j] = prev[j * k_count + k];
                cardinality[k] += column[j];
            }
            Eigen::VectorXd mean = fuzzy_mean(pixels, column, config.m_exponent);
            FuzzyCovariance cov = fuzzy_covariance(pixels, column, mean, config.m_exponent);
            // Prior placeholder; set below once all cardinalities are known.
            next.emplace_back(training.classes[k].name, std::move(mean), std::move(cov.matrix),
                              0.5, cov.ridge_used);
        }
        double card_total = 0.0;
        for (double c : cardinality) card_total += std::max(c, 1e-12);
        std::vector<GaussianClassModel> rebuilt;
        rebuilt.reserve(k_count);
        for (std::size_t k = 0; k < k_count; ++k) {
            double prior = std::max(cardinality[k], 1e-12) / card_total;
            rebuilt.emplace_back(next[k].name(), next[k].mean(), next[k].covariance(), prior,
                                 next[k].ridge_used());
        }
        models = std::move(rebuilt);

        std::vector<double> cur = detail::grade_matrix(models, pixels, threads);
        double delta = 0.0;
        for (std::size_t i = 0; i < cur.size(); ++i)
            delta = std::max(delta, std::abs(cur[i] - prev[i]));
        prev = std::move(cur);
        result.iterations = it;
        result.final_delta = delta;
        if (delta < config.epsilon) {
            result.converged = true;
            break;
        }
    }
    result.models = std::move(models);
    return result;
}

// Full-scene membership map plus hardened argmax labels (ties to the lowest
// class index). Normalization is monotone, so the hardened labels coincide
// with classify() under the same models and no threshold.
inline std::pair<MembershipMap, ClassificationResult> fuzzy_classify(
    const Raster& raster, const std::vector<GaussianClassModel>& models,
    int threads = default_thread_count()) {
    detail::check_models(models, raster.header.nbands);

    MembershipMap map;
    map.nrows = raster.header.nrows;
    map.ncols = raster.header.ncols;
    for (const auto& m : models) map.class_table.push_back(m.name());
    map.grades.resize(raster.header.pixel_count() * models.size());

    ClassificationResult labels;
    labels.nrows = map.nrows;
    labels.ncols = map.ncols;
    labels.class_table = map.class_table;
    labels.labels.assign(raster.header.pixel_count(), 0);

    std::size_t k_count = models.size();
    parallel_for(static_cast<std::size_t>(map.nrows), threads,
                 [&](std::size_t row_begin, std::size_t row_end) {
        for (std::size_t r = row_begin; r < row_end; ++r) {
            for (int c = 0; c < map.ncols; ++c) {
                std::size_t p = r * map.ncols + c;
                Eigen::VectorXd mu = membership_grades(models, raster.pixel(static_cast<int>(r), c));
                std::size_t best = 0;
                for (std::size_t k = 0; k < k_count; ++k) {
                    map.grades[p * k_count + k] = mu[k];
                    if (mu[k] > mu[best]) best = k;
                }
                labels.labels[p] = static_cast<std::uint16_t>(best + 1);
            }
        }
    });
    return {std::move(map), std::move(labels)};
}

// ---- persistence ----

// One band-sequential float64 grid per class plus a class-table sidecar.
inline void save_membership_map(const MembershipMap& map, const std::string& path) {
    std::size_t plane = static_cast<std::size_t>(map.nrows) * map.ncols;
    std::vector<double> bsq(plane * map.nclasses());
    for (std::size_t p = 0; p < plane; ++p)
        for (int k = 0; k < map.nclasses(); ++k)
            bsq[static_cast<std::size_t>(k) * plane + p] = map.grades[p * map.nclasses() + k];
    write_file_atomic(path, bsq.data(), bsq.size() * sizeof(double));
    std::ostringstream out;
    out << "ncols = " << map.ncols << "\n";
    out << "nrows = " << map.nrows << "\n";
    out << "nclasses = " << map.nclasses() << "\n";
    for (int i = 0; i < map.nclasses(); ++i)
        out << "class_" << (i + 1) << " = " << map.class_table[i] << "\n";
    write_file_atomic(path + ".classes", out.str());
}

inline MembershipMap load_membership_map(const std::string& path) {
    auto kv = parse_key_values(read_text_file(path + ".classes"), path + ".classes");
    MembershipMap map;
    map.ncols = static_cast<int>(parse_long(kv.at("ncols"), "ncols"));
    map.nrows = static_cast<int>(parse_long(kv.at("nrows"), "nrows"));
    long nclasses = parse_long(kv.at("nclasses"), "nclasses");
    for (long i = 1; i <= nclasses; ++i)
        map.class_table.push_back(kv.at("class_" + std::to_string(i)));
    auto body = read_binary_file(path);
    std::size_t plane = static_cast<std::size_t>(map.nrows) * map.ncols;
    if (body.size() != plane * nclasses * sizeof(double))
        throw data_error(path + ": size mismatch in membership body");
    std::vector<double> bsq(plane * nclasses);
    std::memcpy(bsq.data(), body.data(), body.size());
    map.grades.resize(plane * nclasses);
    for (std::size_t p = 0; p < plane; ++p)
        for (long k = 0; k < nclasses; ++k)
            map.grades[p * nclasses + k] = bsq[static_cast<std::size_t>(k) * plane + p];
    return map;
}

}  // namespace terraclass
