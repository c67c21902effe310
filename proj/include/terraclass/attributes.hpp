#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "terraclass/errors.hpp"
#include "terraclass/raster.hpp"
#include "terraclass/segmentation.hpp"
#include "terraclass/textio.hpp"

namespace terraclass {

// Per-region spectral, spatial, and texture attributes; the rule engine's
// inputs. Lengths are in meters (pixel units scaled by pixel_size), area in
// square meters.
struct RegionAttributes {
    std::uint32_t region_id = 0;
    std::int64_t pixel_count = 0;
    std::vector<double> avgband;  // per-band mean over the region
    double tx_mean = 0.0;
    double majaxislen = 0.0;
    double area = 0.0;  // pixel_count * pixel_size^2
};

struct AttributeParams {
    int texture_kernel = 3;  // odd window for the local mean filter
    int texture_band = 0;

    void validate() const {
        if (texture_kernel < 1 || texture_kernel % 2 == 0)
            throw data_error("attributes: texture kernel must be odd and >= 1");
    }
};

namespace detail {

inline void check_region_id(const SegmentMap& seg, std::uint32_t region_id) {
    if (region_id < 1 || region_id > seg.region_count)
        throw data_error("attributes: bad region id " + std::to_string(region_id));
}

// Row-major linear pixel indices per region, slot 0 unused.
inline std::vector<std::vector<std::size_t>> region_pixels(const SegmentMap& seg) {
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(seg.region_count) + 1);
    for (std::size_t i = 0; i < seg.labels.size(); ++i) out[seg.labels[i]].push_back(i);
    return out;
}

// kernel x kernel local mean of one band with replicated edges.
inline std::vector<double> mean_filter(const Raster& raster, int band, int kernel) {
    int nr = raster.header.nrows, nc = raster.header.ncols;
    int half = kernel / 2;
    std::vector<double> out(static_cast<std::size_t>(nr) * nc);
    for (int r = 0; r < nr; ++r) {
        for (int c = 0; c < nc; ++c) {
            double acc = 0.0;
            for (int dr = -half; dr <= half; ++dr)
                for (int dc = -half; dc <= half; ++dc) {
                    int rr = std::clamp(r + dr, 0, nr - 1);
                    int cc = std::clamp(c + dc, 0, nc - 1);
                    acc += raster.at(band, rr, cc);
                }
            out[static_cast<std::size_t>(r) * nc + c] = acc / (kernel * kernel);
        }
    }
    return out;
}

inline double mean_over(const std::vector<double>& values,
                        const std::vector<std::size_t>& pixels) {
    double acc = 0.0;
    for (std::size_t i : pixels) acc += values[i];
    return acc / static_cast<double>(pixels.size());
}

// Major axis length from the centered second-moment matrix of the region's
// pixel centers, +1/12 on both diagonal entries for the unit-pixel intrinsic
// moment: 4 * sqrt(largest eigenvalue) * pixel_size.
inline double majaxis_from_pixels(const std::vector<std::size_t>& pixels, int ncols,
                                  double pixel_size) {
    double n = static_cast<double>(pixels.size());
    double mr = 0.0, mc = 0.0;
    for (std::size_t i : pixels) {
        mr += static_cast<double>(i / ncols);
        mc += static_cast<double>(i % ncols);
    }
    mr /= n;
    mc /= n;
    double srr = 0.0, scc = 0.0, src = 0.0;
    for (std::size_t i : pixels) {
        double dr = static_cast<double>(i / ncols) - mr;
        double dc = static_cast<double>(i % ncols) - mc;
        srr += dr * dr;
        scc += dc * dc;
        src += dr * dc;
    }
    srr = srr / n + 1.0 / 12.0;
    scc = scc / n + 1.0 / 12.0;
    src /= n;
    double half_trace = 0.5 * (srr + scc);
    double radius = std::sqrt(0.25 * (srr - scc) * (srr - scc) + src * src);
    return 4.0 * std::sqrt(half_trace + radius) * pixel_size;
}

}  // namespace detail

inline double compute_avgband(const Raster& raster, const SegmentMap& seg,
                              std::uint32_t region_id, int band) {
    detail::check_region_id(seg, region_id);
    if (band < 0 || band >= raster.header.nbands)
        throw data_error("compute_avgband: bad band index");
    std::size_t plane = raster.header.pixel_count();
    double acc = 0.0;
    std::int64_t count = 0;
    for (std::size_t i = 0; i < seg.labels.size(); ++i)
        if (seg.labels[i] == region_id) {
            acc += raster.samples[band * plane + i];
            ++count;
        }
    return acc / static_cast<double>(count);
}

// Local-mean texture: filter the band, then average the filtered values over
// the region.
inline double compute_tx_mean(const Raster& raster, const SegmentMap& seg,
                              std::uint32_t region_id, int kernel = 3, int band = 0) {
    detail::check_region_id(seg, region_id);
    if (kernel < 1 || kernel % 2 == 0) throw data_error("compute_tx_mean: kernel must be odd");
    if (band < 0 || band >= raster.header.nbands)
        throw data_error("compute_tx_mean: bad band index");
    std::vector<double> filtered = detail::mean_filter(raster, band, kernel);
    std::vector<std::size_t> pixels;
    for (std::size_t i = 0; i < seg.labels.size(); ++i)
        if (seg.labels[i] == region_id) pixels.push_back(i);
    return detail::mean_over(filtered, pixels);
}

inline double compute_majaxislen(const SegmentMap& seg, std::uint32_t region_id,
                                 double pixel_size) {
    detail::check_region_id(seg, region_id);
    std::vector<std::size_t> pixels;
    for (std::size_t i = 0; i < seg.labels.size(); ++i)
        if (seg.labels[i] == region_id) pixels.push_back(i);
    return detail::majaxis_from_pixels(pixels, seg.ncols, pixel_size);
}

// All attributes for every region, ids ascending. One filter pass serves all
// tx_mean values.
inline std::vector<RegionAttributes> compute_all(const Raster& raster, const SegmentMap& seg,
                                                 const AttributeParams& params = {}) {
    params.validate();
    if (raster.header.nrows != seg.nrows || raster.header.ncols != seg.ncols)
        throw data_error("compute_all: raster and segment map dimensions disagree");
    if (params.texture_band < 0 || params.texture_band >= raster.header.nbands)
        throw data_error("compute_all: bad texture band");
    auto pixels = detail::region_pixels(seg);
    std::vector<double> filtered =
        detail::mean_filter(raster, params.texture_band, params.texture_kernel);
    double ps = raster.header.pixel_size;
    std::size_t plane = raster.header.pixel_count();

    std::vector<RegionAttributes> out;
    out.reserve(seg.region_count);
    for (std::uint32_t id = 1; id <= seg.region_count; ++id) {
        const auto& px = pixels[id];
        RegionAttributes a;
        a.region_id = id;
        a.pixel_count = static_cast<std::int64_t>(px.size());
        a.avgband.resize(raster.header.nbands);
        for (int b = 0; b < raster.header.nbands; ++b) {
            double acc = 0.0;
            for (std::size_t i : px) acc += raster.samples[b * plane + i];
            a.avgband[b] = acc / static_cast<double>(px.size());
        }
        a.tx_mean = detail::mean_over(filtered, px);
        a.majaxislen = detail::majaxis_from_pixels(px, seg.ncols, ps);
        a.area = static_cast<double>(a.pixel_count) * ps * ps;
        out.push_back(std::move(a));
    }
    return out;
}

// ---- persistence ----

// Delimited text, header row:
// region_id pixel_count area avgband_1..avgband_n tx_mean majaxislen
inline void save_attributes(const std::vector<RegionAttributes>& attrs, const std::string& path) {
    std::ostringstream out;
    int nbands = attrs.empty() ? 0 : static_cast<int>(attrs[0].avgband.size());
    out << "region_id\tpixel_count\tarea";
    for (int b = 1; b <= nbands; ++b) out << "\tavgband_" << b;
    out << "\ttx_mean\tmajaxislen\n";
    for (const auto& a : attrs) {
        out << a.region_id << "\t" << a.pixel_count << "\t" << format_double(a.area);
        for (double v : a.avgband) out << "\t" << format_double(v);
        out << "\t" << format_double(a.tx_mean) << "\t" << format_double(a.majaxislen) << "\n";
    }
    write_file_atomic(path, out.str());
}

inline std::vector<RegionAttributes> load_attributes(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line)) throw data_error(path + ": empty attribute table");
    auto header = split(trim(line), '\t');
    if (header.size() < 5 || header[0] != "region_id" || header[1] != "pixel_count" ||
        header[2] != "area" || header[header.size() - 2] != "tx_mean" ||
        header.back() != "majaxislen")
        throw data_error(path + ": unexpected attribute table header");
    int nbands = static_cast<int>(header.size()) - 5;
    std::vector<RegionAttributes> out;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto cells = split(line, '\t');
        if (cells.size() != header.size())
            throw data_error(path + ": row with wrong column count");
        RegionAttributes a;
        a.region_id = static_cast<std::uint32_t>(parse_long(cells[0], "region_id"));
        a.pixel_count = parse_long(cells[1], "pixel_count");
        a.area = parse_double(cells[2], "area");
        for (int b = 0; b < nbands; ++b)
            a.avgband.push_back(parse_double(cells[3 + b], "avgband"));
        a.tx_mean = parse_double(cells[3 + nbands], "tx_mean");
        a.majaxislen = parse_double(cells[4 + nbands], "majaxislen");
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace terraclass
