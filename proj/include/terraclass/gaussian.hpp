#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <json.hpp>

#include "terraclass/errors.hpp"
#include "terraclass/parallel.hpp"
#include "terraclass/raster.hpp"
#include "terraclass/roi.hpp"

namespace terraclass {

inline constexpr double kLog2Pi = 1.8378770664093454836;

// Ridge factors tried in order when a covariance fails to factorize.
inline constexpr double kRidgeSteps[] = {1e-10, 1e-8, 1e-6, 1e-4};

namespace detail {

inline void symmetrize(Eigen::MatrixXd& m) {
    m = ((m + m.transpose()) * 0.5).eval();
}

}  // namespace detail

// Symmetrizes in place and, if Cholesky fails, adds lambda * trace/n * I with
// lambda stepping through kRidgeSteps until it succeeds. For a zero-trace
// matrix the scale falls back to 1 so a genuine floor exists. Returns the
// ridge actually added (0 when the input already factorizes).
inline double regularize_covariance(Eigen::MatrixXd& cov) {
    detail::symmetrize(cov);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) return 0.0;
    double scale = cov.trace() / cov.rows();
    if (!(scale > 0.0)) scale = 1.0;
    for (double lambda : kRidgeSteps) {
        double ridge = lambda * scale;
        Eigen::MatrixXd candidate =
            cov + ridge * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
        llt.compute(candidate);
        if (llt.info() == Eigen::Success) {
            cov = candidate;
            return ridge;
        }
    }
    throw numeric_error("covariance not positive definite even after maximum regularization");
}

struct ClassStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    double ridge_used = 0.0;
};

// Sample mean and 1/(N-1) sample covariance over the listed pixels,
// symmetrized and regularized to positive definite.
inline ClassStats estimate_class_stats(const Raster& raster,
                                       const std::vector<PixelCoord>& pixels) {
    int n = raster.header.nbands;
    long count = static_cast<long>(pixels.size());
    if (count < n + 1)
        throw data_error("estimate_class_stats: need at least nbands+1 = " +
                         std::to_string(n + 1) + " pixels, got " + std::to_string(count));
    for (const auto& p : pixels)
        if (!raster.header.contains(p.row, p.col))
            throw data_error("estimate_class_stats: pixel outside raster");

    ClassStats stats;
    stats.mean = Eigen::VectorXd::Zero(n);
    for (const auto& p : pixels) stats.mean += raster.pixel(p.row, p.col);
    stats.mean /= static_cast<double>(count);

    stats.covariance = Eigen::MatrixXd::Zero(n, n);
    for (const auto& p : pixels) {
        Eigen::VectorXd d = raster.pixel(p.row, p.col) - stats.mean;
        stats.covariance += d * d.transpose();
    }
    stats.covariance /= static_cast<double>(count - 1);
    stats.ridge_used = regularize_covariance(stats.covariance);
    return stats;
}

// Per-class Gaussian model: mean vector, covariance matrix, prior, with the
// Cholesky factor and log-determinant cached for discriminant evaluation.
class GaussianClassModel {
public:
    GaussianClassModel(std::string name, Eigen::VectorXd mean, Eigen::MatrixXd covariance,
                       double prior, double ridge_used = 0.0)
        : name_(std::move(name)),
          mean_(std::move(mean)),
          covariance_(std::move(covariance)),
          prior_(prior),
          ridge_used_(ridge_used) {
        if (!(prior_ > 0.0) || prior_ > 1.0)
            throw data_error("class '" + name_ + "': prior must lie in (0, 1]");
        if (covariance_.rows() != covariance_.cols() || covariance_.rows() != mean_.size())
            throw data_error("class '" + name_ + "': mean/covariance dimensions disagree");
        double asym = (covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff();
        double scale = std::max(1.0, covariance_.cwiseAbs().maxCoeff());
        if (asym > 1e-12 * scale)
            throw data_error("class '" + name_ + "': covariance is not symmetric");
        detail::symmetrize(covariance_);
        llt_.compute(covariance_);
        if (llt_.info() != Eigen::Success)
            throw numeric_error("class '" + name_ + "': covariance is not positive definite");
        log_det_ = 2.0 * Eigen::MatrixXd(llt_.matrixL()).diagonal().array().log().sum();
    }

    const std::string& name() const { return name_; }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return covariance_; }
    double prior() const { return prior_; }
    double ridge_used() const { return ridge_used_; }
    double log_det() const { return log_det_; }
    int nbands() const { return static_cast<int>(mean_.size()); }

    // (x - m)^T Sigma^{-1} (x - m) through the cached factorization.
    double mahalanobis_sq(const Eigen::VectorXd& x) const {
        if (x.size() != mean_.size())
            throw data_error("class '" + name_ + "': pixel dimension mismatch");
        return llt_.matrixL().solve(x - mean_).squaredNorm();
    }

    // ln f(x) for the multivariate normal, prior excluded.
    double log_density(const Eigen::VectorXd& x) const {
        return -0.5 * (mean_.size() * kLog2Pi + log_det_ + mahalanobis_sq(x));
    }

private:
    std::string name_;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd covariance_;
    double prior_;
    double ridge_used_;
    double log_det_ = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

// g_i(x) = ln p(w_i) - 1/2 ln|Sigma_i| - 1/2 (x - m_i)^T Sigma_i^{-1} (x - m_i).
// The constant -(n/2) ln 2pi is dropped; it offsets every class equally.
inline double discriminant(const GaussianClassModel& model, const Eigen::VectorXd& x) {
    return std::log(model.prior()) - 0.5 * model.log_det() - 0.5 * model.mahalanobis_sq(x);
}

// Sum of per-pixel log densities under the model (prior excluded).
inline double log_likelihood(const GaussianClassModel& model,
                             const std::vector<Eigen::VectorXd>& pixels) {
    double total = 0.0;
    for (const auto& x : pixels) total += model.log_density(x);
    return total;
}

namespace detail {

inline void check_models(const std::vector<GaussianClassModel>& models, int nbands) {
    if (models.empty()) throw data_error("classify: empty model list");
    for (const auto& m : models)
        if (m.nbands() != nbands)
            throw data_error("classify: model '" + m.name() + "' band count " +
                             std::to_string(m.nbands()) + " does not match raster " +
                             std::to_string(nbands));
}

// Discriminant scores for one pixel, plus a log-sum-exp stable softmax.
inline void discriminant_scores(const std::vector<GaussianClassModel>& models,
                                const Eigen::VectorXd& x, std::vector<double>& g) {
    g.resize(models.size());
    for (std::size_t i = 0; i < models.size(); ++i) g[i] = discriminant(models[i], x);
}

inline std::size_t argmax_lowest(const std::vector<double>& g) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < g.size(); ++i)
        if (g[i] > g[best]) best = i;
    return best;
}

inline double log_sum_exp(const std::vector<double>& g) {
    double m = g[0];
    for (double v : g) m = std::max(m, v);
    double s = 0.0;
    for (double v : g) s += std::exp(v - m);
    return m + std::log(s);
}

}  // namespace detail

// Hardened per-pixel labels; 0 is reserved for "unclassified".
struct ClassificationResult {
    int nrows = 0;
    int ncols = 0;
    std::vector<std::uint16_t> labels;  // row-major
    std::vector<std::string> class_table;

    std::uint16_t label(int row, int col) const {
        return labels[static_cast<std::size_t>(row) * ncols + col];
    }
};

// Assigns each pixel to the class with the highest discriminant score (ties
// to the lowest class index). With a threshold, a pixel stays unclassified
// when the winning posterior exp(g_i) / sum_k exp(g_k) falls below it.
inline ClassificationResult classify(const Raster& raster,
                                     const std::vector<GaussianClassModel>& models,
                                     std::optional<double> threshold = std::nullopt,
                                     int threads = default_thread_count()) {
    detail::check_models(models, raster.header.nbands);
    if (threshold && !(*threshold > 0.0 && *threshold < 1.0))
        throw data_error("classify: threshold must lie in (0, 1)");

    ClassificationResult result;
    result.nrows = raster.header.nrows;
    result.ncols = raster.header.ncols;
    result.labels.assign(raster.header.pixel_count(), 0);
    result.class_table.reserve(models.size());
    for (const auto& m : models) result.class_table.push_back(m.name());

    parallel_for(static_cast<std::size_t>(raster.header.nrows), threads,
                 [&](std::size_t row_begin, std::size_t row_end) {
        std::vector<double> g;
        for (std::size_t r = row_begin; r < row_end; ++r) {
            for (int c = 0; c < raster.header.ncols; ++c) {
                Eigen::VectorXd x = raster.pixel(static_cast<int>(r), c);
                detail::discriminant_scores(models, x, g);
                std::size_t best = detail::argmax_lowest(g);
                std::uint16_t label = static_cast<std::uint16_t>(best + 1);
                if (threshold) {
                    double posterior = std::exp(g[best] - detail::log_sum_exp(g));
                    if (posterior < *threshold) label = 0;
                }
                result.labels[r * raster.header.ncols + c] = label;
            }
        }
    });
    return result;
}

// ---- persistence ----

// Model document: per class {name, prior, mean[], covariance[][], ridge_used}.
inline void save_models(const std::vector<GaussianClassModel>& models, const std::string& path) {
    nlohmann::json doc;
    auto& arr = doc["classes"] = nlohmann::json::array();
    for (const auto& m : models) {
        nlohmann::json entry;
        entry["name"] = m.name();
        entry["prior"] = m.prior();
        entry["ridge_used"] = m.ridge_used();
        auto& mean = entry["mean"] = nlohmann::json::array();
        for (int i = 0; i < m.nbands(); ++i) mean.push_back(m.mean()[i]);
        auto& cov = entry["covariance"] = nlohmann::json::array();
        for (int i = 0; i < m.nbands(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (int j = 0; j < m.nbands(); ++j) row.push_back(m.covariance()(i, j));
            cov.push_back(std::move(row));
        }
        arr.push_back(std::move(entry));
    }
    write_file_atomic(path, doc.dump(2) + "\n");
}

inline std::vector<GaussianClassModel> load_models(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw data_error(path + ": " + e.what());
    }
    if (!doc.contains("classes") || !doc["classes"].is_array() || doc["classes"].empty())
        throw data_error(path + ": expected a non-empty 'classes' array");
    std::vector<GaussianClassModel> models;
    for (const auto& entry : doc["classes"]) {
        std::string name = entry.at("name").get<std::string>();
        double prior = entry.at("prior").get<double>();
        double ridge = entry.value("ridge_used", 0.0);
        auto mean_arr = entry.at("mean");
        int n = static_cast<int>(mean_arr.size());
        Eigen::VectorXd mean(n);
        for (int i = 0; i < n; ++i) mean[i] = mean_arr[i].get<double>();
        auto cov_arr = entry.at("covariance");
        if (static_cast<int>(cov_arr.size()) != n)
            throw data_error(path + ": covariance row count mismatch for '" + name + "'");
        Eigen::MatrixXd cov(n, n);
        for (int i = 0; i < n; ++i) {
            if (static_cast<int>(cov_arr[i].size()) != n)
                throw data_error(path + ": covariance column count mismatch for '" + name + "'");
            for (int j = 0; j < n; ++j) cov(i, j) = cov_arr[i][j].get<double>();
        }
        models.emplace_back(name, std::move(mean), std::move(cov), prior, ridge);
    }
    return models;
}

// Label grid: body uint16 little-endian row-major; sidecar <path>.classes
// maps indices to names (0 is always "unclassified").
inline void save_labels(const ClassificationResult& result, const std::string& path) {
    write_file_atomic(path, result.labels.data(), result.labels.size() * sizeof(std::uint16_t));
    std::ostringstream out;
    out << "ncols = " << result.ncols << "\n";
    out << "nrows = " << result.nrows << "\n";
    out << "nclasses = " << result.class_table.size() << "\n";
    for (std::size_t i = 0; i < result.class_table.size(); ++i)
        out << "class_" << (i + 1) << " = " << result.class_table[i] << "\n";
    write_file_atomic(path + ".classes", out.str());
}

inline ClassificationResult load_labels(const std::string& path) {
    auto kv = parse_key_values(read_text_file(path + ".classes"), path + ".classes");
    ClassificationResult result;
    result.ncols = static_cast<int>(parse_long(kv.at("ncols"), "ncols"));
    result.nrows = static_cast<int>(parse_long(kv.at("nrows"), "nrows"));
    long nclasses = parse_long(kv.at("nclasses"), "nclasses");
    for (long i = 1; i <= nclasses; ++i) {
        auto it = kv.find("class_" + std::to_string(i));
        if (it == kv.end()) throw data_error(path + ".classes: missing class_" + std::to_string(i));
        result.class_table.push_back(it->second);
    }
    auto body = read_binary_file(path);
    std::size_t expected =
        static_cast<std::size_t>(result.nrows) * result.ncols * sizeof(std::uint16_t);
    if (body.size() != expected) throw data_error(path + ": size mismatch in label body");
    result.labels.resize(static_cast<std::size_t>(result.nrows) * result.ncols);
    std::memcpy(result.labels.data(), body.data(), body.size());
    for (std::uint16_t v : result.labels)
        if (v > nclasses) throw data_error(path + ": label value exceeds class table");
    return result;
}

}  // namespace terraclass
