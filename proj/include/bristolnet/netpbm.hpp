#pragma once

#include <fstream>
#include <string>

#include "bristolnet/errors.hpp"
#include "bristolnet/image.hpp"

namespace bristolnet {

namespace detail {

inline int pnm_token(std::istream& is, const std::string& path) {
    // whitespace- and comment-tolerant ASCII integer
    int ch = is.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = is.get();
        } else if (std::isspace(ch)) {
            ch = is.get();
        } else {
            break;
        }
    }
    if (ch == EOF || !std::isdigit(ch)) throw FormatError("netpbm: malformed header in " + path);
    long v = 0;
    while (ch != EOF && std::isdigit(ch)) {
        v = v * 10 + (ch - '0');
        if (v > 1 << 24) throw FormatError("netpbm: absurd header value in " + path);
        ch = is.get();
    }
    if (ch != EOF) is.unget();
    return static_cast<int>(v);
}

inline void pnm_header(std::istream& is, const std::string& path, const char* magic, int& w, int& h) {
    char m[2];
    is.read(m, 2);
    if (!is || m[0] != magic[0] || m[1] != magic[1])
        throw FormatError(std::string("netpbm: expected ") + magic + " magic in " + path);
    w = pnm_token(is, path);
    h = pnm_token(is, path);
    const int maxval = pnm_token(is, path);
    if (maxval != 255) throw FormatError("netpbm: only maxval 255 supported, " + path);
    is.get();  // single whitespace byte before raster
    if (!is) throw FormatError("netpbm: truncated header in " + path);
    if (w <= 0 || h <= 0) throw FormatError("netpbm: bad dimensions in " + path);
}

}  // namespace detail

/// Binary PPM (P6, maxval 255).
inline void write_ppm(const ImageU8& img, const std::string& path) {
    BNET_REQUIRE(img.c == 3, "write_ppm: image must have 3 channels");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("write_ppm: cannot open " + path);
    os << "P6\n" << img.w << " " << img.h << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (!os) throw IoError("write_ppm: write failed " + path);
}

inline ImageU8 read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("read_ppm: cannot open " + path);
    int w = 0, h = 0;
    detail::pnm_header(is, path, "P6", w, h);
    ImageU8 img(h, w, 3);
    is.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (!is) throw FormatError("read_ppm: truncated raster in " + path);
    return img;
}

/// Binary PGM (P5, maxval 255).
inline void write_pgm(const ImageU8& img, const std::string& path) {
    BNET_REQUIRE(img.c == 1, "write_pgm: image must have 1 channel");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("write_pgm: cannot open " + path);
    os << "P5\n" << img.w << " " << img.h << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (!os) throw IoError("write_pgm: write failed " + path);
}

inline ImageU8 read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("read_pgm: cannot open " + path);
    int w = 0, h = 0;
    detail::pnm_header(is, path, "P5", w, h);
    ImageU8 img(h, w, 1);
    is.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (!is) throw FormatError("read_pgm: truncated raster in " + path);
    return img;
}

/// Masks on disk are PGM with foreground 255 / background 0; in memory 1/0.
inline void write_mask(const MaskU8& mask, const std::string& path) {
    ImageU8 img(mask.h, mask.w, 1);
    for (size_t i = 0; i < mask.data.size(); ++i) img.data[i] = mask.data[i] ? 255 : 0;
    write_pgm(img, path);
}

inline MaskU8 read_mask(const std::string& path) {
    const ImageU8 img = read_pgm(path);
    MaskU8 mask(img.h, img.w);
    for (size_t i = 0; i < img.data.size(); ++i) mask.data[i] = img.data[i] >= 128 ? 1 : 0;
    return mask;
}

/// Probability map rescaled to 0-255 gray (the "raw prediction" rendering).
inline void write_probmap_pgm(const ProbMap& pm, const std::string& path) {
    ImageU8 img(pm.h, pm.w, 1);
    for (size_t i = 0; i < pm.data.size(); ++i) {
        float v = pm.data[i] * 255.0f + 0.5f;
        if (v < 0.0f) v = 0.0f;
        if (v > 255.0f) v = 255.0f;
        img.data[i] = static_cast<uint8_t>(v);
    }
    write_pgm(img, path);
}

}  // namespace bristolnet
