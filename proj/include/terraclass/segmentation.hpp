#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "terraclass/errors.hpp"
#include "terraclass/raster.hpp"

namespace terraclass {

struct SegmentParams {
    int band_index = 0;
    double scale_level = 50.0;
    double merge_level = 0.0;
    int smoothing_threshold = 1;
    // Parsed and echoed in reports; carries no behavior of its own.
    std::optional<std::pair<double, double>> refine_range;

    void validate() const {
        if (scale_level < 0.0 || scale_level > 100.0)
            throw data_error("segment params: scale_level must lie in [0, 100]");
        if (merge_level < 0.0 || merge_level > 100.0)
            throw data_error("segment params: merge_level must lie in [0, 100]");
        if (smoothing_threshold < 0)
            throw data_error("segment params: smoothing_threshold must be >= 0");
    }
};

// Pixel -> region labeling; ids are 1-based and dense, every region
// 4-connected.
struct SegmentMap {
    int nrows = 0;
    int ncols = 0;
    std::vector<std::uint32_t> labels;  // row-major
    std::uint32_t region_count = 0;

    std::uint32_t label(int row, int col) const {
        return labels[static_cast<std::size_t>(row) * ncols + col];
    }
};

// Linear-interpolated percentile of an unsorted sample, p in [0, 100].
inline double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw data_error("percentile: empty sample");
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values[0];
    double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    if (lo >= values.size() - 1) return values.back();
    double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

// Central-difference gradient magnitude with replicated edges.
inline std::vector<double> gradient_magnitude(const Raster& raster, int band) {
    if (band < 0 || band >= raster.header.nbands)
        throw data_error("gradient_magnitude: bad band index");
    int nr = raster.header.nrows, nc = raster.header.ncols;
    std::vector<double> g(static_cast<std::size_t>(nr) * nc);
    auto sample = [&](int r, int c) {
        r = std::clamp(r, 0, nr - 1);
        c = std::clamp(c, 0, nc - 1);
        return static_cast<double>(raster.at(band, r, c));
    };
    for (int r = 0; r < nr; ++r) {
        for (int c = 0; c < nc; ++c) {
            double gx = 0.5 * (sample(r, c + 1) - sample(r, c - 1));
            double gy = 0.5 * (sample(r + 1, c) - sample(r - 1, c));
            g[static_cast<std::size_t>(r) * nc + c] = std::hypot(gx, gy);
        }
    }
    return g;
}

namespace detail {

// Relabels regions densely, 1-based, in row-major order of first appearance.
inline void relabel_dense(SegmentMap& seg) {
    std::map<std::uint32_t, std::uint32_t> remap;
    for (auto& v : seg.labels) {
        auto it = remap.emplace(v, static_cast<std::uint32_t>(remap.size() + 1)).first;
        v = it->second;
    }
    seg.region_count = static_cast<std::uint32_t>(remap.size());
}

constexpr std::array<std::pair<int, int>, 4> kNeighbors4 = {
    {{-1, 0}, {0, -1}, {0, 1}, {1, 0}}};

}  // namespace detail

// Flat-zone watershed over the percentile-suppressed, 256-level quantized
// gradient of one band:
//   (a) gradient magnitude (central differences, replicated edges);
//   (b) values at or below the scale_level-th percentile become zero;
//   (c) quantize to 256 levels, then flood ascending levels: level-0 flat
//       zones seed regions, each higher-level pixel joins the region that
//       reaches it first (row-major seeding, fixed neighbor order), and
//       plateaus with no labeled neighbor start new regions.
inline SegmentMap segment(const Raster& raster, const SegmentParams& params) {
    params.validate();
    std::vector<double> grad = gradient_magnitude(raster, params.band_index);
    int nr = raster.header.nrows, nc = raster.header.ncols;
    std::size_t n = grad.size();

    double cutoff = percentile(grad, params.scale_level);
    double gmax = 0.0;
    for (auto& v : grad) {
        if (v <= cutoff) v = 0.0;
        gmax = std::max(gmax, v);
    }
    std::vector<int> level(n, 0);
    if (gmax > 0.0) {
        for (std::size_t i = 0; i < n; ++i)
            level[i] = std::min(255, static_cast<int>(std::floor(grad[i] / gmax * 256.0)));
    }

    SegmentMap seg;
    seg.nrows = nr;
    seg.ncols = nc;
    seg.labels.assign(n, 0);
    std::uint32_t next_id = 0;

    std::vector<std::vector<std::size_t>> at_level(256);
    for (std::size_t i = 0; i < n; ++i) at_level[level[i]].push_back(i);

    std::deque<std::size_t> queue;
    for (int lv = 0; lv < 256; ++lv) {
        const auto& pixels = at_level[lv];
        if (pixels.empty()) continue;
        // Flood this level from already-labeled neighbors first.
        for (std::size_t i : pixels) {
            int r = static_cast<int>(i / nc), c = static_cast<int>(i % nc);
            for (auto [dr, dc] : detail::kNeighbors4) {
                int rr = r + dr, cc = c + dc;
                if (rr < 0 || rr >= nr || cc < 0 || cc >= nc) continue;
                std::uint32_t lbl = seg.labels[static_cast<std::size_t>(rr) * nc + cc];
                if (lbl != 0) {
                    seg.labels[i] = lbl;
                    queue.push_back(i);
                    break;
                }
            }
        }
        while (!queue.empty()) {
            std::size_t i = queue.front();
            queue.pop_front();
            int r = static_cast<int>(i / nc), c = static_cast<int>(i % nc);
            for (auto [dr, dc] : detail::kNeighbors4) {
                int rr = r + dr, cc = c + dc;
                if (rr < 0 || rr >= nr || cc < 0 || cc >= nc) continue;
                std::size_t j = static_cast<std::size_t>(rr) * nc + cc;
                if (seg.labels[j] == 0 && level[j] == lv) {
                    seg.labels[j] = seg.labels[i];
                    queue.push_back(j);
                }
            }
        }
        // Remaining pixels at this level form new regions, one per flat zone.
        for (std::size_t i : pixels) {
            if (seg.labels[i] != 0) continue;
            seg.labels[i] = ++next_id;
            queue.push_back(i);
            while (!queue.empty()) {
                std::size_t j = queue.front();
                queue.pop_front();
                int r = static_cast<int>(j / nc), c = static_cast<int>(j % nc);
                for (auto [dr, dc] : detail::kNeighbors4) {
                    int rr = r + dr, cc = c + dc;
                    if (rr < 0 || rr >= nr || cc < 0 || cc >= nc) continue;
                    std::size_t k = static_cast<std::size_t>(rr) * nc + cc;
                    if (seg.labels[k] == 0 && level[k] == lv) {
                        seg.labels[k] = seg.labels[j];
                        queue.push_back(k);
                    }
                }
            }
        }
    }
    detail::relabel_dense(seg);
    return seg;
}

namespace detail {

// Mutable region bookkeeping shared by merge and smooth: pixel counts,
// spectral sums over all bands, and 4-adjacency.
struct RegionGraph {
    std::vector<std::int64_t> count;  // by region id (1-based; slot 0 unused)
    std::vector<Eigen::VectorXd> sum;
    std::vector<std::set<std::uint32_t>> adj;
    std::vector<bool> alive;

    RegionGraph(const Raster& raster, const SegmentMap& seg) {
        std::size_t m = static_cast<std::size_t>(seg.region_count) + 1;
        count.assign(m, 0);
        sum.assign(m, Eigen::VectorXd::Zero(raster.header.nbands));
        adj.assign(m, {});
        alive.assign(m, true);
        alive[0] = false;
        for (int r = 0; r < seg.nrows; ++r) {
            for (int c = 0; c < seg.ncols; ++c) {
                std::uint32_t a = seg.label(r, c);
                count[a] += 1;
                sum[a] += raster.pixel(r, c);
                if (c + 1 < seg.ncols) {
                    std::uint32_t b = seg.label(r, c + 1);
                    if (a != b) { adj[a].insert(b); adj[b].insert(a); }
                }
                if (r + 1 < seg.nrows) {
                    std::uint32_t b = seg.label(r + 1, c);
                    if (a != b) { adj[a].insert(b); adj[b].insert(a); }
                }
            }
        }
    }

    Eigen::VectorXd mean(std::uint32_t id) const {
        return sum[id] / static_cast<double>(count[id]);
    }

    double cost(std::uint32_t a, std::uint32_t b) const { return (mean(a) - mean(b)).norm(); }

    // Merges loser into keeper; adjacency is rewired to keeper.
    void merge(std::uint32_t keeper, std::uint32_t loser) {
        count[keeper] += count[loser];
        sum[keeper] += sum[loser];
        adj[keeper].erase(loser);
        for (std::uint32_t nb : adj[loser]) {
            if (nb == keeper) continue;
            adj[nb].erase(loser);
            adj[nb].insert(keeper);
            adj[keeper].insert(nb);
        }
        adj[loser].clear();
        alive[loser] = false;
    }
};

inline std::uint32_t resolve_owner(std::vector<std::uint32_t>& owner, std::uint32_t id) {
    while (owner[id] != id) {
        owner[id] = owner[owner[id]];
        id = owner[id];
    }
    return id;
}

inline void apply_owners(SegmentMap& seg, std::vector<std::uint32_t>& owner) {
    for (std::uint32_t i = 1; i < owner.size(); ++i) resolve_owner(owner, i);
    for (auto& v : seg.labels) v = owner[v];
    relabel_dense(seg);
}

}  // namespace detail

// Iteratively merges the cheapest adjacent region pair (cost = Euclidean
// distance between mean spectra over all bands) while the cost stays at or
// below the merge_level-th percentile of the *initial* pair cost
// distribution. merge_level 0 is the identity. Ties break on the
// lexicographically smallest id pair.
inline SegmentMap merge_regions(const Raster& raster, const SegmentMap& seg, double merge_level) {
    if (merge_level < 0.0 || merge_level > 100.0)
        throw data_error("merge_regions: merge_level must lie in [0, 100]");
    SegmentMap out = seg;
    if (merge_level == 0.0 || seg.region_count < 2) return out;

    detail::RegionGraph graph(raster, seg);
    std::vector<double> initial_costs;
    for (std::uint32_t a = 1; a <= seg.region_count; ++a)
        for (std::uint32_t b : graph.adj[a])
            if (a < b) initial_costs.push_back(graph.cost(a, b));
    if (initial_costs.empty()) return out;
    double cutoff = percentile(initial_costs, merge_level);

    std::vector<std::uint32_t> owner(seg.region_count + 1);
    for (std::uint32_t i = 0; i <= seg.region_count; ++i) owner[i] = i;

    for (;;) {
        double best_cost = std::numeric_limits<double>::infinity();
        std::uint32_t best_a = 0, best_b = 0;
        for (std::uint32_t a = 1; a <= seg.region_count; ++a) {
            if (!graph.alive[a]) continue;
            for (std::uint32_t b : graph.adj[a]) {
                if (a >= b) continue;
                double cost = graph.cost(a, b);
                if (cost < best_cost) {
                    best_cost = cost;
                    best_a = a;
                    best_b = b;
                }
            }
        }
        if (best_a == 0 || best_cost > cutoff) break;
        graph.merge(best_a, best_b);
        owner[best_b] = best_a;
    }
    detail::apply_owners(out, owner);
    return out;
}

// Absorbs every region smaller than threshold into its spectrally closest
// neighbor (ties to the lowest region id), smallest region first (ties to
// the lowest id), until no undersized region remains. threshold <= 1 is the
// identity.
inline SegmentMap smooth(const SegmentMap& seg, const Raster& raster, int threshold) {
    if (threshold < 0) throw data_error("smooth: threshold must be >= 0");
    SegmentMap out = seg;
    if (threshold <= 1 || seg.region_count < 2) return out;

    detail::RegionGraph graph(raster, seg);
    std::vector<std::uint32_t> owner(seg.region_count + 1);
    for (std::uint32_t i = 0; i <= seg.region_count; ++i) owner[i] = i;

    for (;;) {
        std::uint32_t victim = 0;
        std::int64_t victim_count = threshold;
        for (std::uint32_t a = 1; a <= seg.region_count; ++a)
            if (graph.alive[a] && graph.count[a] < victim_count) {
                victim = a;
                victim_count = graph.count[a];
            }
        if (victim == 0) break;
        if (graph.adj[victim].empty()) break;  // single region left
        std::uint32_t target = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::uint32_t nb : graph.adj[victim]) {
            double cost = graph.cost(victim, nb);
            if (cost < best) {
                best = cost;
                target = nb;
            }
        }
        graph.merge(target, victim);
        owner[victim] = target;
    }
    detail::apply_owners(out, owner);
    return out;
}

// One exported region boundary: closed ring of pixel-corner coordinates in
// meters, x = col * pixel_size, y = row * pixel_size.
struct PolygonFeature {
    std::uint32_t region_id = 0;
    std::vector<std::array<double, 2>> ring;  // closed: first point repeated last
    double area = 0.0;                        // shoelace area of the ring
    double perimeter = 0.0;
    bool holes_omitted = false;
};

namespace detail {

// Traces the outer boundary of one region along pixel edges, keeping the
// region on the right of the walk; returns lattice corner points (row, col).
// Start corner must be the top-left corner of the region's first pixel in
// row-major order, so the initial direction East has the region below.
inline std::vector<std::pair<int, int>> trace_boundary(const SegmentMap& seg, std::uint32_t id,
                                                       int start_row, int start_col) {
    auto inside = [&](int r, int c) {
        return r >= 0 && r < seg.nrows && c >= 0 && c < seg.ncols && seg.label(r, c) == id;
    };
    // Directions on lattice corners: 0=E, 1=S, 2=W, 3=N.
    constexpr std::array<std::pair<int, int>, 4> step = {{{0, 1}, {1, 0}, {0, -1}, {-1, 0}}};
    std::vector<std::pair<int, int>> ring;
    int r = start_row, c = start_col;
    int dir = 0;
    const int start_dir = dir;
    ring.emplace_back(r, c);
    do {
        r += step[dir].first;
        c += step[dir].second;
        ring.emplace_back(r, c);
        // Cells touching corner (r, c): NW = (r-1, c-1), NE = (r-1, c),
        // SW = (r, c-1), SE = (r, c). Turn right if possible, else straight,
        // else left; this keeps the region on the right.
        bool nw = inside(r - 1, c - 1), ne = inside(r - 1, c);
        bool sw = inside(r, c - 1), se = inside(r, c);
        switch (dir) {
            case 0: dir = !se ? 1 : (!ne ? 0 : 3); break;  // East
            case 1: dir = !sw ? 2 : (!se ? 1 : 0); break;  // South
            case 2: dir = !nw ? 3 : (!sw ? 2 : 1); break;  // West
            case 3: dir = !ne ? 0 : (!nw ? 3 : 2); break;  // North
        }
    } while (!(r == start_row && c == start_col && dir == start_dir));
    return ring;
}

}  // namespace detail

// Outer boundary of every region as a closed ring of pixel-corner
// coordinates scaled by pixel_size. Interior holes are omitted; the flag
// records when the ring area differs from the pixel area because of one.
inline std::vector<PolygonFeature> export_polygons(const SegmentMap& seg,
                                                   const RasterHeader& header) {
    double ps = header.pixel_size;
    std::vector<std::pair<int, int>> first(seg.region_count + 1, {-1, -1});
    std::vector<std::int64_t> counts(seg.region_count + 1, 0);
    for (int r = 0; r < seg.nrows; ++r)
        for (int c = 0; c < seg.ncols; ++c) {
            std::uint32_t id = seg.label(r, c);
            if (first[id].first == -1) first[id] = {r, c};
            counts[id] += 1;
        }
    std::vector<PolygonFeature> features;
    features.reserve(seg.region_count);
    for (std::uint32_t id = 1; id <= seg.region_count; ++id) {
        auto corners = detail::trace_boundary(seg, id, first[id].first, first[id].second);
        PolygonFeature f;
        f.region_id = id;
        f.ring.reserve(corners.size());
        for (auto [rr, cc] : corners) f.ring.push_back({cc * ps, rr * ps});
        double twice = 0.0;
        for (std::size_t i = 0; i + 1 < f.ring.size(); ++i) {
            twice += f.ring[i][0] * f.ring[i + 1][1] - f.ring[i + 1][0] * f.ring[i][1];
            f.perimeter += std::hypot(f.ring[i + 1][0] - f.ring[i][0],
                                      f.ring[i + 1][1] - f.ring[i][1]);
        }
        f.area = 0.5 * std::abs(twice);
        double pixel_area = static_cast<double>(counts[id]) * ps * ps;
        f.holes_omitted = std::abs(f.area - pixel_area) > 1e-6 * std::max(1.0, pixel_area);
        features.push_back(std::move(f));
    }
    return features;
}

// ---- persistence ----

inline void save_segment_map(const SegmentMap& seg, const std::string& path, int band_index = 0) {
    write_file_atomic(path, seg.labels.data(), seg.labels.size() * sizeof(std::uint32_t));
    std::ostringstream out;
    out << "ncols = " << seg.ncols << "\n";
    out << "nrows = " << seg.nrows << "\n";
    out << "region_count = " << seg.region_count << "\n";
    out << "band_index = " << band_index << "\n";
    write_file_atomic(path + ".meta", out.str());
}

inline SegmentMap load_segment_map(const std::string& path, int* band_index = nullptr) {
    auto kv = parse_key_values(read_text_file(path + ".meta"), path + ".meta");
    SegmentMap seg;
    seg.ncols = static_cast<int>(parse_long(kv.at("ncols"), "ncols"));
    seg.nrows = static_cast<int>(parse_long(kv.at("nrows"), "nrows"));
    seg.region_count =
        static_cast<std::uint32_t>(parse_long(kv.at("region_count"), "region_count"));
    if (band_index && kv.count("band_index"))
        *band_index = static_cast<int>(parse_long(kv.at("band_index"), "band_index"));
    auto body = read_binary_file(path);
    std::size_t n = static_cast<std::size_t>(seg.nrows) * seg.ncols;
    if (body.size() != n * sizeof(std::uint32_t))
        throw data_error(path + ": size mismatch in segment body");
    seg.labels.resize(n);
    std::memcpy(seg.labels.data(), body.data(), body.size());
    for (std::uint32_t v : seg.labels)
        if (v < 1 || v > seg.region_count) throw data_error(path + ": region id out of range");
    return seg;
}

inline void save_polygons(const std::vector<PolygonFeature>& features, double pixel_size,
                          const std::string& path) {
    nlohmann::json doc;
    doc["pixel_size"] = pixel_size;
    doc["note"] = "outer boundaries only; interior hole rings are omitted";
    auto& arr = doc["features"] = nlohmann::json::array();
    for (const auto& f : features) {
        nlohmann::json entry;
        entry["region_id"] = f.region_id;
        entry["area"] = f.area;
        entry["perimeter"] = f.perimeter;
        entry["holes_omitted"] = f.holes_omitted;
        auto& ring = entry["ring"] = nlohmann::json::array();
        for (const auto& p : f.ring) ring.push_back({p[0], p[1]});
        arr.push_back(std::move(entry));
    }
    write_file_atomic(path, doc.dump(2) + "\n");
}

}  // namespace terraclass
