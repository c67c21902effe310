#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "terraclass/errors.hpp"
#include "terraclass/raster.hpp"

namespace terraclass {

struct PixelCoord {
    int row = 0;
    int col = 0;
    auto operator<=>(const PixelCoord&) const = default;
};

// Polygon vertex in (row, col) coordinates; pixel (r, c) has its center at
// the point (r, c).
struct PolyVertex {
    double row = 0.0;
    double col = 0.0;
};

inline double polygon_area(const std::vector<PolyVertex>& poly) {
    double twice = 0.0;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
        twice += poly[j].col * poly[i].row - poly[i].col * poly[j].row;
    return 0.5 * std::abs(twice);
}

// Even-odd crossing test. Points on a lower/left edge count as inside, on an
// upper/right edge as outside, so adjacent polygons rasterize disjointly.
inline bool point_in_polygon(const std::vector<PolyVertex>& poly, double row, double col) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        if ((poly[i].row > row) != (poly[j].row > row)) {
            double cross = (poly[j].col - poly[i].col) * (row - poly[i].row) /
                               (poly[j].row - poly[i].row) +
                           poly[i].col;
            if (col < cross) inside = !inside;
        }
    }
    return inside;
}

// All pixel centers inside the polygon, row-major order. A polygon entirely
// outside the grid yields an empty list; a zero-area polygon is an error.
inline std::vector<PixelCoord> rasterize_roi(const std::vector<PolyVertex>& polygon,
                                             const RasterHeader& header) {
    if (polygon.size() < 3)
        throw data_error("rasterize_roi: polygon needs at least 3 vertices");
    if (polygon_area(polygon) == 0.0)
        throw data_error("rasterize_roi: degenerate polygon (zero area)");
    double rmin = polygon[0].row, rmax = polygon[0].row;
    double cmin = polygon[0].col, cmax = polygon[0].col;
    for (const auto& v : polygon) {
        rmin = std::min(rmin, v.row);
        rmax = std::max(rmax, v.row);
        cmin = std::min(cmin, v.col);
        cmax = std::max(cmax, v.col);
    }
    int r0 = std::max(0, static_cast<int>(std::ceil(rmin)));
    int r1 = std::min(header.nrows - 1, static_cast<int>(std::floor(rmax)));
    int c0 = std::max(0, static_cast<int>(std::ceil(cmin)));
    int c1 = std::min(header.ncols - 1, static_cast<int>(std::floor(cmax)));
    std::vector<PixelCoord> out;
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c)
            if (point_in_polygon(polygon, r, c)) out.push_back({r, c});
    return out;
}

// Named training classes with explicit pixel references.
struct TrainingSet {
    struct Class {
        std::string name;
        std::vector<PixelCoord> pixels;
    };
    std::vector<Class> classes;

    // Bounds, uniqueness, and the nbands+1 minimum needed for a full-rank
    // sample covariance.
    void validate(const RasterHeader& header) const {
        std::set<std::string> names;
        for (const auto& cls : classes) {
            if (!names.insert(cls.name).second)
                throw data_error("training set: duplicate class name '" + cls.name + "'");
            if (static_cast<int>(cls.pixels.size()) < header.nbands + 1)
                throw data_error("training set: class '" + cls.name + "' has " +
                                 std::to_string(cls.pixels.size()) + " pixels, needs at least " +
                                 std::to_string(header.nbands + 1));
            for (const auto& p : cls.pixels)
                if (!header.contains(p.row, p.col))
                    throw data_error("training set: class '" + cls.name + "' references pixel (" +
                                     std::to_string(p.row) + ", " + std::to_string(p.col) +
                                     ") outside the raster");
        }
        if (classes.empty()) throw data_error("training set: no classes");
    }
};

// ROI document: {"classes": [{"name": ..., "pixels": [[row, col], ...]}
//                            or {"name": ..., "polygon": [[row, col], ...]}]}
inline TrainingSet parse_roi(const std::string& text, const RasterHeader& header) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("roi document: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("classes") || !doc["classes"].is_array())
        throw data_error("roi document: expected object with a 'classes' array");
    TrainingSet ts;
    for (const auto& entry : doc["classes"]) {
        TrainingSet::Class cls;
        if (!entry.contains("name") || !entry["name"].is_string())
            throw data_error("roi document: class entry missing 'name'");
        cls.name = entry["name"].get<std::string>();
        if (entry.contains("pixels")) {
            for (const auto& p : entry["pixels"]) {
                if (!p.is_array() || p.size() != 2)
                    throw data_error("roi document: pixel entries must be [row, col]");
                cls.pixels.push_back({p[0].get<int>(), p[1].get<int>()});
            }
        } else if (entry.contains("polygon")) {
            std::vector<PolyVertex> poly;
            for (const auto& p : entry["polygon"]) {
                if (!p.is_array() || p.size() != 2)
                    throw data_error("roi document: polygon vertices must be [row, col]");
                poly.push_back({p[0].get<double>(), p[1].get<double>()});
            }
            cls.pixels = rasterize_roi(poly, header);
        } else {
            throw data_error("roi document: class '" + cls.name +
                             "' needs either 'pixels' or 'polygon'");
        }
        ts.classes.push_back(std::move(cls));
    }
    ts.validate(header);
    return ts;
}

inline TrainingSet load_roi(const std::string& path, const RasterHeader& header) {
    return parse_roi(read_text_file(path), header);
}

inline void save_roi(const TrainingSet& ts, const std::string& path) {
    nlohmann::json doc;
    doc["classes"] = nlohmann::json::array();
    for (const auto& cls : ts.classes) {
        nlohmann::json entry;
        entry["name"] = cls.name;
        auto& px = entry["pixels"] = nlohmann::json::array();
        for (const auto& p : cls.pixels) px.push_back({p.row, p.col});
        doc["classes"].push_back(std::move(entry));
    }
    write_file_atomic(path, doc.dump(2) + "\n");
}

}  // namespace terraclass
