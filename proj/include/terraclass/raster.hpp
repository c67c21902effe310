#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "terraclass/errors.hpp"
#include "terraclass/textio.hpp"

namespace terraclass {

// Sidecar metadata for a band-sequential raster. Wavelengths are band-center
// values in micrometers; pixel_size is meters per pixel side.
struct RasterHeader {
    int ncols = 0;
    int nrows = 0;
    int nbands = 0;
    double pixel_size = 30.0;
    std::vector<double> wavelengths;   // empty or exactly nbands entries
    std::vector<std::string> band_names;

    void validate() const {
        if (ncols < 1 || nrows < 1 || nbands < 1)
            throw data_error("raster header: ncols, nrows, nbands must all be >= 1");
        if (!(pixel_size > 0.0))
            throw data_error("raster header: pixel_size must be positive");
        if (!wavelengths.empty()) {
            if (static_cast<int>(wavelengths.size()) != nbands)
                throw data_error("raster header: wavelengths must have exactly nbands entries");
            for (double w : wavelengths)
                if (!(w > 0.0)) throw data_error("raster header: wavelengths must be positive");
        }
        if (!band_names.empty() && static_cast<int>(band_names.size()) != nbands)
            throw data_error("raster header: band_names must have exactly nbands entries");
    }

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(nrows) * static_cast<std::size_t>(ncols);
    }
    std::size_t sample_count() const { return pixel_count() * static_cast<std::size_t>(nbands); }
    bool contains(int row, int col) const {
        return row >= 0 && row < nrows && col >= 0 && col < ncols;
    }
};

// Multiband grid of float32 samples, band-sequential: all of band 0 row-major,
// then band 1, and so on. Immutable once built; safe to share across readers.
struct Raster {
    RasterHeader header;
    std::vector<float> samples;

    Raster() = default;
    explicit Raster(const RasterHeader& h) : header(h), samples(h.sample_count(), 0.0f) {
        header.validate();
    }

    std::size_t index(int band, int row, int col) const {
        return (static_cast<std::size_t>(band) * header.nrows + row) * header.ncols + col;
    }
    float at(int band, int row, int col) const { return samples[index(band, row, col)]; }
    float& at(int band, int row, int col) { return samples[index(band, row, col)]; }

    // Observation vector for one pixel: one entry per band.
    Eigen::VectorXd pixel(int row, int col) const {
        Eigen::VectorXd x(header.nbands);
        std::size_t plane = header.pixel_count();
        std::size_t base = static_cast<std::size_t>(row) * header.ncols + col;
        for (int b = 0; b < header.nbands; ++b)
            x[b] = samples[base + b * plane];
        return x;
    }

    void validate() const {
        header.validate();
        if (samples.size() != header.sample_count())
            throw data_error("raster: sample count size mismatch");
        for (float v : samples)
            if (!std::isfinite(v)) throw data_error("raster: non-finite sample encountered");
    }
};

namespace detail {

inline std::string header_path(const std::string& raster_path) { return raster_path + ".hdr"; }

inline std::vector<double> parse_number_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const auto& part : split(s, ','))
        out.push_back(parse_double(part, what));
    return out;
}

}  // namespace detail

inline RasterHeader load_raster_header(const std::string& raster_path) {
    std::string hdr_path = detail::header_path(raster_path);
    auto kv = parse_key_values(read_text_file(hdr_path), hdr_path);
    RasterHeader h;
    bool have_cols = false, have_rows = false, have_bands = false;
    for (const auto& [key, val] : kv) {
        if (key == "ncols") { h.ncols = static_cast<int>(parse_long(val, "ncols")); have_cols = true; }
        else if (key == "nrows") { h.nrows = static_cast<int>(parse_long(val, "nrows")); have_rows = true; }
        else if (key == "nbands") { h.nbands = static_cast<int>(parse_long(val, "nbands")); have_bands = true; }
        else if (key == "pixel_size") h.pixel_size = parse_double(val, "pixel_size");
        else if (key == "wavelengths") h.wavelengths = detail::parse_number_list(val, "wavelengths");
        else if (key == "band_names") {
            for (const auto& part : split(val, ','))
                h.band_names.push_back(trim(part));
        } else throw data_error(hdr_path + ": unknown header key '" + key + "'");
    }
    if (!have_cols || !have_rows || !have_bands)
        throw data_error(hdr_path + ": missing required key (ncols, nrows, nbands)");
    h.validate();
    return h;
}

inline std::string format_raster_header(const RasterHeader& h) {
    std::ostringstream out;
    out << "ncols = " << h.ncols << "\n";
    out << "nrows = " << h.nrows << "\n";
    out << "nbands = " << h.nbands << "\n";
    out << "pixel_size = " << format_double(h.pixel_size) << "\n";
    if (!h.wavelengths.empty()) {
        out << "wavelengths = ";
        for (std::size_t i = 0; i < h.wavelengths.size(); ++i)
            out << (i ? ", " : "") << format_double(h.wavelengths[i]);
        out << "\n";
    }
    if (!h.band_names.empty()) {
        out << "band_names = ";
        for (std::size_t i = 0; i < h.band_names.size(); ++i)
            out << (i ? ", " : "") << h.band_names[i];
        out << "\n";
    }
    return out.str();
}

// Body is float32 little-endian, band-sequential; header is a sidecar
// key = value document at <path>.hdr.
inline Raster load_raster(const std::string& path) {
    Raster r;
    r.header = load_raster_header(path);
    auto body = read_binary_file(path);
    std::size_t expected = r.header.sample_count() * sizeof(float);
    if (body.size() != expected)
        throw data_error(path + ": size mismatch, body has " + std::to_string(body.size()) +
                         " bytes but header declares " + std::to_string(expected));
    r.samples.resize(r.header.sample_count());
    std::memcpy(r.samples.data(), body.data(), body.size());
    for (float v : r.samples)
        if (!std::isfinite(v)) throw data_error(path + ": non-finite sample encountered");
    return r;
}

inline void save_raster(const Raster& r, const std::string& path) {
    r.validate();
    write_file_atomic(path, r.samples.data(), r.samples.size() * sizeof(float));
    write_file_atomic(detail::header_path(path), format_raster_header(r.header));
}

}  // namespace terraclass
