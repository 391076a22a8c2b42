#include "pmp/data_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <numeric>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pmp/errors.hpp"

namespace pmp {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int k = 0; k < bytes; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

std::uint64_t get_le(std::span<const std::uint8_t> b, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int k = 0; k < bytes; ++k) v |= std::uint64_t{b[at + static_cast<std::size_t>(k)]} << (8 * k);
  return v;
}

}  // namespace

std::size_t IdxArray::item_size() const {
  std::size_t s = 1;
  for (std::size_t k = 1; k < dims.size(); ++k) s *= dims[k];
  return s;
}

IdxArray read_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw ParseError("IDX header needs 4 bytes, found " + std::to_string(bytes.size()), bytes.size());
  if (bytes[0] != 0 || bytes[1] != 0) throw ParseError("bad IDX magic: leading bytes must be zero", 0);
  if (bytes[2] != 0x08) throw ParseError("unsupported IDX element type " + std::to_string(bytes[2]), 2);
  const std::size_t rank = bytes[3];
  if (rank == 0) throw ParseError("IDX rank must be at least 1", 3);
  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() < header)
    throw ParseError("IDX header needs " + std::to_string(header) + " bytes, found " + std::to_string(bytes.size()),
                     bytes.size());
  IdxArray out;
  std::size_t payload = 1;
  for (std::size_t k = 0; k < rank; ++k) {
    out.dims.push_back(read_be32(bytes, 4 + 4 * k));
    payload *= out.dims.back();
  }
  const std::size_t expected = header + payload;
  if (bytes.size() < expected)
    throw ParseError("truncated IDX payload: expected " + std::to_string(expected) + " bytes, found " +
                         std::to_string(bytes.size()),
                     bytes.size());
  if (bytes.size() > expected)
    throw ParseError("IDX file has " + std::to_string(bytes.size() - expected) + " trailing bytes after " +
                         std::to_string(expected),
                     expected);
  out.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return out;
}

std::vector<std::uint8_t> write_idx(const IdxArray& array) {
  if (array.dims.empty() || array.dims.size() > 255) throw StructuralError("IDX rank must be between 1 and 255");
  std::size_t payload = 1;
  for (auto d : array.dims) payload *= d;
  if (payload != array.data.size()) throw StructuralError("IDX dimensions do not match the payload");
  std::vector<std::uint8_t> out{0, 0, 0x08, static_cast<std::uint8_t>(array.dims.size())};
  for (auto d : array.dims)
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(d >> s));
  out.insert(out.end(), array.data.begin(), array.data.end());
  return out;
}

IdxArray read_idx_file(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw ParseError("cannot open " + path.string(), 0);
  std::vector<std::uint8_t> bytes;
  std::uint8_t buf[1 << 16];
  int got;
  while ((got = gzread(f, buf, sizeof buf)) > 0) bytes.insert(bytes.end(), buf, buf + got);
  const bool failed = got < 0;
  gzclose(f);
  if (failed) throw ParseError("decompression failed for " + path.string(), bytes.size());
  return read_idx(bytes);
}

std::filesystem::path dataset_dir() {
  if (const char* dir = std::getenv("PMP_DATA_DIR")) return dir;
  return "data";
}

SampleSet BinaryImageSet::to_samples(std::string label) const {
  SampleSet s(height * width, std::move(label));
  s.values.assign(pixels.begin(), pixels.end());
  return s;
}

void contour_image(std::span<const std::uint8_t> gray, std::size_t height, std::size_t width,
                   std::span<std::uint8_t> out, std::uint8_t threshold) {
  if (gray.size() != height * width || out.size() != height * width)
    throw StructuralError("image buffers do not match the stated size");
  auto on = [&](std::ptrdiff_t r, std::ptrdiff_t c) {
    if (r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(height) || c >= static_cast<std::ptrdiff_t>(width))
      return false;
    return gray[static_cast<std::size_t>(r) * width + static_cast<std::size_t>(c)] >= threshold;
  };
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c) {
      const auto R = static_cast<std::ptrdiff_t>(r);
      const auto C = static_cast<std::ptrdiff_t>(c);
      out[r * width + c] = on(R, C) && !(on(R - 1, C) && on(R + 1, C) && on(R, C - 1) && on(R, C + 1)) ? 1 : 0;
    }
}

BinaryImageSet extract_zero_contours(const IdxArray& images, const IdxArray& labels) {
  if (images.dims.size() != 3) throw StructuralError("image array must have rank 3");
  if (labels.count() != images.count()) throw StructuralError("label count does not match image count");
  BinaryImageSet out;
  out.height = images.dims[1];
  out.width = images.dims[2];
  const std::size_t px = out.height * out.width;
  for (std::size_t k = 0; k < images.count(); ++k) {
    if (labels.data[k] != 0) continue;
    const std::size_t at = out.pixels.size();
    out.pixels.resize(at + px);
    contour_image(std::span<const std::uint8_t>(images.data).subspan(k * px, px), out.height, out.width,
                  std::span<std::uint8_t>(out.pixels).subspan(at, px));
  }
  return out;
}

BinaryImageSet gen_synthetic_contours(std::size_t count, std::size_t size, Rng& rng) {
  BinaryImageSet out{size, size, {}};
  std::vector<std::uint8_t> gray(size * size);
  const double s = static_cast<double>(size);
  for (std::size_t k = 0; k < count; ++k) {
    const double cy = s / 2 + (rng.uniform() - 0.5) * s * 0.2;
    const double cx = s / 2 + (rng.uniform() - 0.5) * s * 0.2;
    const double ry = s * (0.22 + 0.15 * rng.uniform());
    const double rx = s * (0.15 + 0.15 * rng.uniform());
    const double tilt = (rng.uniform() - 0.5) * 0.8;
    for (std::size_t r = 0; r < size; ++r)
      for (std::size_t c = 0; c < size; ++c) {
        const double y = static_cast<double>(r) + 0.5 - cy;
        const double x = static_cast<double>(c) + 0.5 - cx;
        const double u = std::cos(tilt) * x + std::sin(tilt) * y;
        const double v = -std::sin(tilt) * x + std::cos(tilt) * y;
        gray[r * size + c] = (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0 ? 255 : 0;
      }
    const std::size_t at = out.pixels.size();
    out.pixels.resize(at + size * size);
    contour_image(gray, size, size, std::span<std::uint8_t>(out.pixels).subspan(at, size * size));
  }
  return out;
}

BinaryImageSet gen_bars_and_stripes(std::size_t count, std::size_t size, Rng& rng) {
  BinaryImageSet out{size, size, std::vector<std::uint8_t>(count * size * size)};
  std::vector<std::uint8_t> lines(size);
  for (std::size_t k = 0; k < count; ++k) {
    const bool rows = rng.bernoulli(0.5);
    for (auto& l : lines) l = rng.bernoulli(0.5) ? 1 : 0;
    std::uint8_t* img = out.pixels.data() + k * size * size;
    for (std::size_t r = 0; r < size; ++r)
      for (std::size_t c = 0; c < size; ++c) img[r * size + c] = lines[rows ? r : c];
  }
  return out;
}

BinaryImageSet gen_stripes(std::size_t count, std::size_t size, std::size_t max_lines, Rng& rng) {
  if (max_lines == 0 || max_lines > size) throw ParameterError("max_lines must lie in [1, size]");
  BinaryImageSet out{size, size, std::vector<std::uint8_t>(count * size * size)};
  std::vector<std::size_t> order(size);
  for (std::size_t k = 0; k < count; ++k) {
    const bool rows = rng.bernoulli(0.5);
    const std::size_t lines = 1 + rng.below(max_lines);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < lines; ++i) std::swap(order[i], order[i + rng.below(size - i)]);
    std::uint8_t* img = out.pixels.data() + k * size * size;
    for (std::size_t i = 0; i < lines; ++i)
      for (std::size_t t = 0; t < size; ++t) img[rows ? order[i] * size + t : t * size + order[i]] = 1;
  }
  return out;
}

std::vector<std::uint8_t> deconv_forward(std::span<const std::uint8_t> W, std::span<const std::uint8_t> S,
                                         std::size_t n_images, std::size_t n_feat, std::size_t fh, std::size_t fw,
                                         std::size_t sh, std::size_t sw) {
  if (W.size() != n_feat * fh * fw || S.size() != n_images * n_feat * sh * sw)
    throw StructuralError("feature or location array has the wrong size");
  const std::size_t h = sh + fh - 1;
  const std::size_t w = sw + fw - 1;
  std::vector<std::uint8_t> X(n_images * h * w, 0);
  for (std::size_t img = 0; img < n_images; ++img)
    for (std::size_t k = 0; k < n_feat; ++k)
      for (std::size_t r = 0; r < sh; ++r)
        for (std::size_t c = 0; c < sw; ++c) {
          if (!S[((img * n_feat + k) * sh + r) * sw + c]) continue;
          for (std::size_t u = 0; u < fh; ++u)
            for (std::size_t v = 0; v < fw; ++v)
              if (W[(k * fh + u) * fw + v]) X[(img * h + r + u) * w + c + v] = 1;
        }
  return X;
}

DeconvTruth gen_deconv_dataset(std::size_t n_images, std::size_t n_feat, std::size_t fh, std::size_t fw,
                               std::size_t sh, std::size_t sw, double feature_density, double location_density,
                               Rng& rng) {
  if (!(feature_density > 0.0 && feature_density < 1.0) || !(location_density > 0.0 && location_density < 1.0))
    throw ParameterError("densities must lie in (0, 1)");
  if (n_images == 0 || n_feat == 0 || fh == 0 || fw == 0 || sh == 0 || sw == 0)
    throw ParameterError("deconvolution dimensions must be positive");
  DeconvTruth t{n_images, n_feat, fh, fw, sh, sw, {}, {}, {}};
  t.W.resize(n_feat * fh * fw);
  for (auto& v : t.W) v = rng.bernoulli(feature_density) ? 1 : 0;
  t.S.resize(n_images * n_feat * sh * sw);
  for (auto& v : t.S) v = rng.bernoulli(location_density) ? 1 : 0;
  t.X = deconv_forward(t.W, t.S, n_images, n_feat, fh, fw, sh, sw);
  return t;
}

DeconvLayout deconv_layout(std::size_t n_images, std::size_t h, std::size_t w, std::size_t n_feat, std::size_t fh,
                           std::size_t fw) {
  if (fh > h || fw > w || fh == 0 || fw == 0) throw StructuralError("features must fit inside the images");
  DeconvLayout L;
  L.n_images = n_images;
  L.n_feat = n_feat;
  L.fh = fh;
  L.fw = fw;
  L.h = h;
  L.w = w;
  L.sh = h - fh + 1;
  L.sw = w - fw + 1;
  L.w_begin = 0;
  L.s_begin = n_feat * fh * fw;
  L.and_begin = L.s_begin + n_images * n_feat * L.sh * L.sw;
  L.x_begin = L.and_begin + n_images * n_feat * L.sh * L.sw * fh * fw;
  L.total = L.x_begin + n_images * h * w;
  return L;
}

DeconvGraph build_deconv_graph(std::span<const std::uint8_t> X, std::size_t n_images, std::size_t h, std::size_t w,
                               std::size_t n_feat, std::size_t fh, std::size_t fw, double w_logodds,
                               double s_logodds) {
  if (X.size() != n_images * h * w) throw StructuralError("image array does not match the stated size");
  for (auto v : X)
    if (v > 1) throw StructuralError("images must be binary");
  DeconvGraph out;
  out.layout = deconv_layout(n_images, h, w, n_feat, fh, fw);
  const auto& L = out.layout;
  FactorGraph& g = out.graph;
  for (std::size_t k = L.w_begin; k < L.s_begin; ++k) g.add_variable(std::vector<double>{0.0, w_logodds});
  for (std::size_t k = L.s_begin; k < L.and_begin; ++k) g.add_variable(std::vector<double>{0.0, s_logodds});
  for (std::size_t k = L.and_begin; k < L.x_begin; ++k) g.add_variable(2);
  for (std::size_t k = L.x_begin; k < L.total; ++k) g.add_variable(2);

  // tops[pixel] collects the AND nodes that can switch the pixel on.
  std::vector<std::vector<std::uint32_t>> tops(n_images * h * w);
  auto a = static_cast<std::uint32_t>(L.and_begin);
  for (std::size_t img = 0; img < n_images; ++img)
    for (std::size_t k = 0; k < n_feat; ++k)
      for (std::size_t r = 0; r < L.sh; ++r)
        for (std::size_t c = 0; c < L.sw; ++c)
          for (std::size_t u = 0; u < fh; ++u)
            for (std::size_t v = 0; v < fw; ++v, ++a) {
              g.add_factor({static_cast<std::uint32_t>(L.w_var(k, u, v)), static_cast<std::uint32_t>(L.s_var(img, k, r, c)), a},
                           AndFactor{});
              tops[(img * h + r + u) * w + c + v].push_back(a);
            }
  for (std::size_t img = 0; img < n_images; ++img)
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        const std::size_t p = (img * h + r) * w + c;
        const auto x = static_cast<std::uint32_t>(L.x_var(img, r, c));
        if (tops[p].empty()) {
          if (X[p]) throw ValidationError("pixel " + std::to_string(p) + " is set but no placement covers it");
        } else {
          auto vars = tops[p];
          vars.push_back(x);
          g.add_factor(std::move(vars), OrFactor{});
        }
        out.evidence.push_back({x, static_cast<std::int32_t>(X[p])});
      }
  return out;
}

std::vector<std::uint8_t> deconv_reconstruct(const DeconvLayout& L, std::span<const std::int32_t> x) {
  if (x.size() < L.and_begin) throw StructuralError("assignment too short for the deconvolution layout");
  std::vector<std::uint8_t> W(x.begin() + static_cast<std::ptrdiff_t>(L.w_begin),
                              x.begin() + static_cast<std::ptrdiff_t>(L.s_begin));
  std::vector<std::uint8_t> S(x.begin() + static_cast<std::ptrdiff_t>(L.s_begin),
                              x.begin() + static_cast<std::ptrdiff_t>(L.and_begin));
  return deconv_forward(W, S, L.n_images, L.n_feat, L.fh, L.fw, L.sh, L.sw);
}

double pixel_agreement(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw StructuralError("pixel arrays differ in size");
  if (a.empty()) return 1.0;
  std::size_t same = 0;
  for (std::size_t k = 0; k < a.size(); ++k) same += a[k] == b[k];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

std::vector<std::uint8_t> encode_samples(const SampleSet& samples) {
  const bool wide = std::any_of(samples.values.begin(), samples.values.end(), [](std::uint16_t v) { return v > 255; });
  const int bytes = wide ? 2 : 1;
  std::vector<std::uint8_t> out{'P', 'M', 'P', 'S'};
  put_le(out, static_cast<std::uint64_t>(bytes), 4);
  put_le(out, samples.size(), 8);
  put_le(out, samples.num_vars, 8);
  for (auto v : samples.values) put_le(out, v, bytes);
  return out;
}

SampleSet decode_samples(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t header = 24;
  if (bytes.size() < header) throw ParseError("sample file header needs 24 bytes", bytes.size());
  if (bytes[0] != 'P' || bytes[1] != 'M' || bytes[2] != 'P' || bytes[3] != 'S')
    throw ParseError("bad sample file magic", 0);
  const auto width = get_le(bytes, 4, 4);
  if (width != 1 && width != 2) throw ParseError("sample entries must be 1 or 2 bytes wide", 4);
  const auto rows = get_le(bytes, 8, 8);
  const auto cols = get_le(bytes, 16, 8);
  const std::size_t expected = header + rows * cols * width;
  if (bytes.size() != expected)
    throw ParseError("sample payload: expected " + std::to_string(expected) + " bytes, found " +
                         std::to_string(bytes.size()),
                     std::min(bytes.size(), expected));
  SampleSet s(cols, "file");
  s.values.resize(rows * cols);
  for (std::size_t k = 0; k < s.values.size(); ++k)
    s.values[k] = static_cast<std::uint16_t>(get_le(bytes, header + k * width, static_cast<int>(width)));
  return s;
}

std::string samples_to_csv(const SampleSet& samples) {
  std::string out;
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const auto row = samples.row(r);
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ',';
      out += std::to_string(row[k]);
    }
    out += '\n';
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace pmp
