#pragma once

// =============================================================================
// Landmark correlation kernel: 2-D radix-2 FFT, frequency-domain circular
// cross-correlation with peak extraction, and a timing harness. Convention:
// un-normalized forward transform, 1/(W*H) applied on the inverse. The
// correlation surface is
//
//   c[m][n] = sum_{i,j} img[(i+m) mod H][(j+n) mod W] * tpl[i][j]
//
// computed as IFFT( FFT(img) .* conj(FFT(tpl)) ).
// =============================================================================

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "ftsim/common.hpp"
#include "ftsim/rng.hpp"

namespace ftsim::lvs {

struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> samples;  // row-major

    double at(int row, int col) const {
        return samples[static_cast<std::size_t>(row * width + col)];
    }
    double& at(int row, int col) {
        return samples[static_cast<std::size_t>(row * width + col)];
    }
};

inline bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

inline void check_fft_dims(const Image& img) {
    if (!is_power_of_two(img.width) || !is_power_of_two(img.height)) {
        throw ConfigError("lvs: image dimensions must be powers of two, got " +
                          std::to_string(img.width) + "x" + std::to_string(img.height));
    }
    if (img.samples.size() != static_cast<std::size_t>(img.width) *
                                  static_cast<std::size_t>(img.height)) {
        throw ConfigError("lvs: sample count does not match image dimensions");
    }
}

namespace detail {

// Iterative radix-2 Cooley-Tukey, in place, un-normalized.
inline void fft_pow2(std::complex<double>* a, int n, bool inverse) {
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * std::numbers::pi / len * (inverse ? 1.0 : -1.0);
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (int j = 0; j < len / 2; ++j) {
                std::complex<double> u = a[i + j];
                std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

inline void fft2_inplace(std::vector<std::complex<double>>& grid, int width, int height,
                         bool inverse) {
    for (int r = 0; r < height; ++r) {
        fft_pow2(grid.data() + static_cast<std::ptrdiff_t>(r) * width, width, inverse);
    }
    std::vector<std::complex<double>> col(static_cast<std::size_t>(height));
    for (int c = 0; c < width; ++c) {
        for (int r = 0; r < height; ++r) {
            col[static_cast<std::size_t>(r)] = grid[static_cast<std::size_t>(r * width + c)];
        }
        fft_pow2(col.data(), height, inverse);
        for (int r = 0; r < height; ++r) {
            grid[static_cast<std::size_t>(r * width + c)] = col[static_cast<std::size_t>(r)];
        }
    }
}

}  // namespace detail

// Forward 2-D DFT of a power-of-two image, row-major spectrum.
inline std::vector<std::complex<double>> fft2_forward(const Image& img) {
    check_fft_dims(img);
    std::vector<std::complex<double>> grid(img.samples.begin(), img.samples.end());
    detail::fft2_inplace(grid, img.width, img.height, false);
    return grid;
}

// Inverse 2-D DFT with the 1/(W*H) normalization.
inline std::vector<std::complex<double>> fft2_inverse(std::vector<std::complex<double>> grid,
                                                      int width, int height) {
    if (!is_power_of_two(width) || !is_power_of_two(height)) {
        throw ConfigError("lvs: spectrum dimensions must be powers of two");
    }
    if (grid.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw ConfigError("lvs: spectrum size does not match dimensions");
    }
    detail::fft2_inplace(grid, width, height, true);
    double norm = 1.0 / (static_cast<double>(width) * static_cast<double>(height));
    for (auto& v : grid) v *= norm;
    return grid;
}

struct CorrelationResult {
    Image surface;
    int peak_row = 0;
    int peak_col = 0;
    double peak_value = 0.0;
};

// Peak search with the smallest-row-then-column tie rule.
inline void find_peak(CorrelationResult& res) {
    const Image& s = res.surface;
    res.peak_row = 0;
    res.peak_col = 0;
    res.peak_value = s.samples.empty() ? 0.0 : s.samples[0];
    for (int r = 0; r < s.height; ++r) {
        for (int c = 0; c < s.width; ++c) {
            double v = s.at(r, c);
            if (v > res.peak_value) {
                res.peak_value = v;
                res.peak_row = r;
                res.peak_col = c;
            }
        }
    }
}

inline CorrelationResult fft_correlate(const Image& image, const Image& map_template) {
    check_fft_dims(image);
    check_fft_dims(map_template);
    if (image.width != map_template.width || image.height != map_template.height) {
        throw ConfigError("lvs: image and template dimensions must match");
    }

    auto spec_img = fft2_forward(image);
    auto spec_tpl = fft2_forward(map_template);
    for (std::size_t i = 0; i < spec_img.size(); ++i) {
        spec_img[i] *= std::conj(spec_tpl[i]);
    }
    auto corr = fft2_inverse(std::move(spec_img), image.width, image.height);

    CorrelationResult res;
    res.surface.width = image.width;
    res.surface.height = image.height;
    res.surface.samples.resize(corr.size());
    for (std::size_t i = 0; i < corr.size(); ++i) {
        res.surface.samples[i] = corr[i].real();
    }
    find_peak(res);
    return res;
}

// -----------------------------------------------------------------------------
// Timing harness
// -----------------------------------------------------------------------------

struct BenchRow {
    int size = 0;
    std::string op;
    int reps = 0;
    double median_ms = 0.0;
};

inline Image synthetic_image(int size, std::uint64_t seed) {
    Image img;
    img.width = size;
    img.height = size;
    img.samples.resize(static_cast<std::size_t>(size) * static_cast<std::size_t>(size));
    SplitMix64 rng(seed);
    for (auto& s : img.samples) s = rng.uniform01();
    return img;
}

namespace detail {

template <typename F>
double median_ms(int reps, F&& body) {
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(reps));
    for (int i = 0; i < reps; ++i) {
        auto t0 = std::chrono::steady_clock::now();
        body();
        auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    std::size_t n = times.size();
    return (n % 2 == 1) ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
}

}  // namespace detail

// Median wall-clock per operation per size. Correlation is timed as
// transform + product + inverse; the peak scan is a separate line item.
inline std::vector<BenchRow> bench(const std::vector<int>& sizes, int reps) {
    if (reps < 3) throw ConfigError("lvs: bench requires reps >= 3");
    std::vector<BenchRow> rows;
    for (int size : sizes) {
        if (!is_power_of_two(size)) {
            throw ConfigError("lvs: bench sizes must be powers of two");
        }
        Image a = synthetic_image(size, 0x1000u + static_cast<std::uint64_t>(size));
        Image b = synthetic_image(size, 0x2000u + static_cast<std::uint64_t>(size));

        volatile double sink = 0.0;
        double t_fft = detail::median_ms(reps, [&] {
            auto spec = fft2_forward(a);
            sink = sink + spec[1].real();
        });
        rows.push_back({size, "forward_fft", reps, t_fft});

        double t_corr = detail::median_ms(reps, [&] {
            auto sa = fft2_forward(a);
            auto sb = fft2_forward(b);
            for (std::size_t i = 0; i < sa.size(); ++i) sa[i] *= std::conj(sb[i]);
            auto c = fft2_inverse(std::move(sa), size, size);
            sink = sink + c[1].real();
        });
        rows.push_back({size, "fft_correlate", reps, t_corr});

        CorrelationResult res = fft_correlate(a, b);
        double t_peak = detail::median_ms(reps, [&] {
            find_peak(res);
            sink = sink + res.peak_value;
        });
        rows.push_back({size, "peak_search", reps, t_peak});
    }
    return rows;
}

// -----------------------------------------------------------------------------
// Image containers
// -----------------------------------------------------------------------------

namespace detail {

inline int pgm_read_token(std::istream& in) {
    // Skips whitespace and '#' comment lines.
    while (true) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int value = 0;
    if (!(in >> value)) throw ConfigError("lvs: malformed PGM header");
    return value;
}

}  // namespace detail

// Binary PGM (P5), 8- or 16-bit, intensities scaled to [0, 1].
inline Image load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("lvs: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw ConfigError("lvs: expected binary PGM (P5) in " + path);
    int width = detail::pgm_read_token(in);
    int height = detail::pgm_read_token(in);
    int maxval = detail::pgm_read_token(in);
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
        throw ConfigError("lvs: invalid PGM geometry in " + path);
    }
    in.get();  // single whitespace after maxval

    Image img;
    img.width = width;
    img.height = height;
    img.samples.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));

    const bool wide = maxval > 255;
    std::vector<unsigned char> raw(img.samples.size() * (wide ? 2 : 1));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
        throw ConfigError("lvs: truncated PGM payload in " + path);
    }
    for (std::size_t i = 0; i < img.samples.size(); ++i) {
        unsigned v = wide ? (static_cast<unsigned>(raw[2 * i]) << 8 | raw[2 * i + 1])
                          : raw[i];
        img.samples[i] = static_cast<double>(v) / static_cast<double>(maxval);
    }
    return img;
}

// Raw float64 grid container: magic "FGRD", u32 width, u32 height, then
// width*height little-endian doubles, row-major.
inline void save_raw(const Image& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("lvs: cannot write " + path);
    out.write("FGRD", 4);
    auto w = static_cast<std::uint32_t>(img.width);
    auto h = static_cast<std::uint32_t>(img.height);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    out.write(reinterpret_cast<const char*>(img.samples.data()),
              static_cast<std::streamsize>(img.samples.size() * sizeof(double)));
}

inline Image load_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("lvs: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::string(magic, 4) != "FGRD") {
        throw ConfigError("lvs: bad raw-grid magic in " + path);
    }
    std::uint32_t w = 0, h = 0;
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    if (!in || w == 0 || h == 0) throw ConfigError("lvs: bad raw-grid header in " + path);

    Image img;
    img.width = static_cast<int>(w);
    img.height = static_cast<int>(h);
    img.samples.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    in.read(reinterpret_cast<char*>(img.samples.data()),
            static_cast<std::streamsize>(img.samples.size() * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != img.samples.size() * sizeof(double)) {
        throw ConfigError("lvs: truncated raw-grid payload in " + path);
    }
    return img;
}

}  // namespace ftsim::lvs
