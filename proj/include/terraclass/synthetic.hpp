#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "terraclass/errors.hpp"
#include "terraclass/raster.hpp"
#include "terraclass/roi.hpp"

namespace terraclass {

// Standard-normal stream with a fixed Box-Muller implementation, so scenes
// are reproducible bit-for-bit for a given seed regardless of the standard
// library's distribution internals.
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double u2 = uniform01();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    double uniform01() { return (rng_() >> 11) * 0x1.0p-53; }

    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// One class region of a synthetic scene: a half-open rectangle of pixels
// drawn from a multivariate normal. Rectangles must partition the grid.
struct SceneRegion {
    std::string class_name;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    int row0 = 0, col0 = 0, row1 = 0, col1 = 0;  // [row0, row1) x [col0, col1)
};

struct SyntheticScene {
    Raster raster;
    TrainingSet training;
    std::vector<std::uint16_t> truth;  // per pixel, 1-based class index
    std::vector<std::string> class_names;
};

inline SyntheticScene generate_synthetic_scene(const std::vector<SceneRegion>& regions,
                                               const RasterHeader& header, std::uint64_t seed) {
    header.validate();
    if (regions.empty()) throw data_error("synthetic scene: no regions");

    // Map region class names to dense class indices, preserving first use.
    std::vector<std::string> class_names;
    std::vector<int> region_class(regions.size());
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const auto& name = regions[i].class_name;
        auto it = std::find(class_names.begin(), class_names.end(), name);
        if (it == class_names.end()) {
            region_class[i] = static_cast<int>(class_names.size());
            class_names.push_back(name);
        } else {
            region_class[i] = static_cast<int>(it - class_names.begin());
        }
    }

    std::vector<Eigen::MatrixXd> chol(regions.size());
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const auto& reg = regions[i];
        if (reg.mean.size() != header.nbands || reg.covariance.rows() != header.nbands ||
            reg.covariance.cols() != header.nbands)
            throw data_error("synthetic scene: region '" + reg.class_name +
                             "' dimensions do not match nbands");
        Eigen::LLT<Eigen::MatrixXd> llt(reg.covariance);
        if (llt.info() != Eigen::Success)
            throw numeric_error("synthetic scene: covariance for '" + reg.class_name +
                                "' is not symmetric positive definite");
        chol[i] = llt.matrixL();
    }

    // Every pixel must be covered by exactly one rectangle.
    std::vector<int> owner(header.pixel_count(), -1);
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const auto& reg = regions[i];
        if (reg.row0 < 0 || reg.col0 < 0 || reg.row1 > header.nrows || reg.col1 > header.ncols ||
            reg.row0 >= reg.row1 || reg.col0 >= reg.col1)
            throw data_error("synthetic scene: region '" + reg.class_name + "' rectangle is invalid");
        for (int r = reg.row0; r < reg.row1; ++r)
            for (int c = reg.col0; c < reg.col1; ++c) {
                int& o = owner[static_cast<std::size_t>(r) * header.ncols + c];
                if (o != -1)
                    throw data_error("synthetic scene: overlapping regions at (" +
                                     std::to_string(r) + ", " + std::to_string(c) + ")");
                o = static_cast<int>(i);
            }
    }
    for (std::size_t i = 0; i < owner.size(); ++i)
        if (owner[i] == -1)
            throw data_error("synthetic scene: regions do not partition the grid");

    SyntheticScene scene;
    scene.raster = Raster(header);
    scene.truth.resize(header.pixel_count());
    scene.class_names = class_names;

    NormalSampler normal(seed);
    Eigen::VectorXd z(header.nbands);
    std::size_t plane = header.pixel_count();
    for (int r = 0; r < header.nrows; ++r) {
        for (int c = 0; c < header.ncols; ++c) {
            std::size_t p = static_cast<std::size_t>(r) * header.ncols + c;
            int reg = owner[p];
            for (int b = 0; b < header.nbands; ++b) z[b] = normal();
            Eigen::VectorXd x = regions[reg].mean + chol[reg] * z;
            for (int b = 0; b < header.nbands; ++b)
                scene.raster.samples[p + b * plane] = static_cast<float>(x[b]);
            scene.truth[p] = static_cast<std::uint16_t>(region_class[reg] + 1);
        }
    }

    scene.training.classes.resize(class_names.size());
    for (std::size_t k = 0; k < class_names.size(); ++k)
        scene.training.classes[k].name = class_names[k];
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const auto& reg = regions[i];
        auto& pixels = scene.training.classes[region_class[i]].pixels;
        for (int r = reg.row0; r < reg.row1; ++r)
            for (int c = reg.col0; c < reg.col1; ++c) pixels.push_back({r, c});
    }
    scene.training.validate(header);
    return scene;
}

}  // namespace terraclass
