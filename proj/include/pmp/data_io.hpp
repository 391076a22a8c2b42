#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pmp/factor_graph.hpp"
#include "pmp/rng.hpp"
#include "pmp/sample_set.hpp"

namespace pmp {

/// An unsigned-byte IDX array: big-endian header (two zero bytes, type code
/// 0x08, rank) followed by rank u32 dimensions and the payload.
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  std::size_t count() const { return dims.empty() ? 0 : dims[0]; }
  /// Product of all dimensions after the first.
  std::size_t item_size() const;
};

IdxArray read_idx(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_idx(const IdxArray& array);
/// Reads a file, decompressing it first when it is gzip-compressed.
IdxArray read_idx_file(const std::filesystem::path& path);

/// Directory holding dataset files: $PMP_DATA_DIR, else ./data.
std::filesystem::path dataset_dir();

struct BinaryImageSet {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // count x height x width, entries 0/1

  std::size_t count() const { return height && width ? pixels.size() / (height * width) : 0; }
  SampleSet to_samples(std::string label = "images") const;
};

/// Binarizes at `threshold` and keeps the set pixels with at least one unset
/// 4-neighbor; pixels on the frame count as bordering unset pixels.
void contour_image(std::span<const std::uint8_t> gray, std::size_t height, std::size_t width,
                   std::span<std::uint8_t> out, std::uint8_t threshold = 128);

/// Contours of the images labeled 0.
BinaryImageSet extract_zero_contours(const IdxArray& images, const IdxArray& labels);

/// Contours of random filled ellipses, a stand-in for digit outlines.
BinaryImageSet gen_synthetic_contours(std::size_t count, std::size_t size, Rng& rng);

/// Bars-and-stripes images: all rows or all columns, each line on with
/// probability 1/2.
BinaryImageSet gen_bars_and_stripes(std::size_t count, std::size_t size, Rng& rng);

/// Sparse striped patterns: 1 to max_lines distinct full rows, or full
/// columns, set per image.
BinaryImageSet gen_stripes(std::size_t count, std::size_t size, std::size_t max_lines, Rng& rng);

/// Ground truth of the binary convolution model. Index layouts are row-major:
/// W[feat][fh][fw], S[image][feat][sh][sw], X[image][h][w] with
/// h = sh + fh - 1 and w = sw + fw - 1.
struct DeconvTruth {
  std::size_t n_images = 0, n_feat = 0, fh = 0, fw = 0, sh = 0, sw = 0;
  std::vector<std::uint8_t> W, S, X;

  std::size_t height() const { return sh + fh - 1; }
  std::size_t width() const { return sw + fw - 1; }
};

/// X = OR over features and placements of W shifted to every set entry of S.
std::vector<std::uint8_t> deconv_forward(std::span<const std::uint8_t> W, std::span<const std::uint8_t> S,
                                         std::size_t n_images, std::size_t n_feat, std::size_t fh, std::size_t fw,
                                         std::size_t sh, std::size_t sw);

/// Samples W and S from Bernoulli priors and renders X. sh x sw is the
/// placement grid, so images are (sh + fh - 1) x (sw + fw - 1).
DeconvTruth gen_deconv_dataset(std::size_t n_images, std::size_t n_feat, std::size_t fh, std::size_t fw,
                               std::size_t sh, std::size_t sw, double feature_density, double location_density,
                               Rng& rng);

/// Variable ranges of a deconvolution graph.
struct DeconvLayout {
  std::size_t n_images = 0, n_feat = 0, fh = 0, fw = 0, sh = 0, sw = 0, h = 0, w = 0;
  std::size_t w_begin = 0, s_begin = 0, and_begin = 0, x_begin = 0, total = 0;

  std::size_t num_latent() const { return and_begin - w_begin; }
  std::size_t w_var(std::size_t k, std::size_t u, std::size_t v) const { return w_begin + (k * fh + u) * fw + v; }
  std::size_t s_var(std::size_t img, std::size_t k, std::size_t r, std::size_t c) const {
    return s_begin + ((img * n_feat + k) * sh + r) * sw + c;
  }
  std::size_t x_var(std::size_t img, std::size_t r, std::size_t c) const { return x_begin + (img * h + r) * w + c; }
};

/// Layout for images of size h x w with n_feat features of fh x fw.
DeconvLayout deconv_layout(std::size_t n_images, std::size_t h, std::size_t w, std::size_t n_feat, std::size_t fh,
                           std::size_t fw);

struct DeconvGraph {
  FactorGraph graph;
  DeconvLayout layout;
  /// X pixel variables fixed to the observed image values.
  Evidence evidence;
};

/// Graph over W and S entries (unary log-odds prior_logodds), one AND node per
/// (image, feature, placement, feature pixel) and one OR factor per pixel
/// whose bottom is the X variable. Throws ValidationError when a set pixel has
/// no contributing placement.
DeconvGraph build_deconv_graph(std::span<const std::uint8_t> X, std::size_t n_images, std::size_t h, std::size_t w,
                               std::size_t n_feat, std::size_t fh, std::size_t fw, double w_logodds = -3.0,
                               double s_logodds = -3.0);

/// Renders the images implied by the W and S entries of an assignment.
std::vector<std::uint8_t> deconv_reconstruct(const DeconvLayout& layout, std::span<const std::int32_t> x);

/// Fraction of equal entries.
double pixel_agreement(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// Binary sample file: "PMPS", u32 bytes per entry (1 or 2), u64 rows,
/// u64 columns, then the entries row-major, all little-endian.
std::vector<std::uint8_t> encode_samples(const SampleSet& samples);
SampleSet decode_samples(std::span<const std::uint8_t> bytes);
std::string samples_to_csv(const SampleSet& samples);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace pmp
