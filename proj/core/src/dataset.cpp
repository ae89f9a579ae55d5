#include "sparselab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sparselab/error.hpp"
#include "sparselab/rng.hpp"
#include "sparselab/tensor_io.hpp"

namespace sparselab {

void Dataset::validate() const {
  if (labels.empty()) throw InputError("dataset is empty");
  if (images.rank() != 4 || images.dim(0) != labels.size()) {
    throw DimensionError("dataset images " + shape_string(images.dims()) + " do not match " +
                         std::to_string(labels.size()) + " labels");
  }
  for (Scalar v : images.values()) {
    if (!(v >= 0 && v <= 1)) throw InputError("dataset pixel outside [0, 1]");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) throw InputError("dataset label outside [0, classes)");
  }
}

Tensor Dataset::gather_images(std::span<const std::size_t> indices) const {
  const std::size_t per = image_numel();
  Tensor out({indices.size(), channels(), height(), width()});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw InputError("sample index out of range");
    std::copy_n(images.data() + indices[i] * per, per, out.data() + i * per);
  }
  return out;
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) out[i] = labels.at(indices[i]);
  return out;
}

Dataset Dataset::select(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw InputError("selecting an empty subset");
  Dataset out;
  out.images = gather_images(indices);
  out.labels = gather_labels(indices);
  out.classes = classes;
  out.split = split;
  return out;
}

namespace {

// Bilinear upsampling of a g x g grid onto h x w.
std::vector<double> upsample(const std::vector<double>& grid, std::size_t g, std::size_t h, std::size_t w) {
  std::vector<double> out(h * w);
  for (std::size_t r = 0; r < h; ++r) {
    const double fy = h == 1 ? 0.0 : static_cast<double>(r) * static_cast<double>(g - 1) / static_cast<double>(h - 1);
    const auto y0 = std::min(static_cast<std::size_t>(fy), g - 2);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t c = 0; c < w; ++c) {
      const double fx = w == 1 ? 0.0 : static_cast<double>(c) * static_cast<double>(g - 1) / static_cast<double>(w - 1);
      const auto x0 = std::min(static_cast<std::size_t>(fx), g - 2);
      const double tx = fx - static_cast<double>(x0);
      const double top = grid[y0 * g + x0] * (1 - tx) + grid[y0 * g + x0 + 1] * tx;
      const double bot = grid[(y0 + 1) * g + x0] * (1 - tx) + grid[(y0 + 1) * g + x0 + 1] * tx;
      out[r * w + c] = top * (1 - ty) + bot * ty;
    }
  }
  return out;
}

}  // namespace

Dataset make_synthetic(const SyntheticSpec& spec, std::uint64_t seed, const std::string& split) {
  if (spec.classes < 2) throw InputError("synthetic data needs at least two classes");
  if (spec.per_class == 0 || spec.channels == 0 || spec.height == 0 || spec.width == 0) {
    throw InputError("synthetic data dims must be positive");
  }
  if (!(spec.overlap >= 0.0 && spec.overlap <= 1.0)) throw InputError("overlap must lie in [0, 1]");
  if (!(spec.noise_std >= 0.0)) throw InputError("noise_std must be nonnegative");

  constexpr std::size_t kGrid = 4;
  const std::size_t plane = spec.height * spec.width;
  const std::size_t per = spec.channels * plane;
  std::vector<std::vector<double>> protos(spec.classes, std::vector<double>(per));
  {
    Rng rng = make_rng(seed, "synthetic-prototypes");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& proto : protos) {
      for (std::size_t ch = 0; ch < spec.channels; ++ch) {
        std::vector<double> grid(kGrid * kGrid);
        for (auto& g : grid) g = u(rng);
        const auto up = upsample(grid, kGrid, spec.height, spec.width);
        for (std::size_t i = 0; i < plane; ++i) proto[ch * plane + i] = 0.15 + 0.7 * up[i];
      }
    }
  }

  const std::size_t n = spec.classes * spec.per_class;
  Dataset data;
  data.images = Tensor({n, spec.channels, spec.height, spec.width});
  data.labels.resize(n);
  data.classes = spec.classes;
  data.split = split;
  const std::uint64_t split_seed = derive_seed(seed, "synthetic-" + split);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<int>(i % spec.classes);
    Rng rng(derive_seed(split_seed, i));
    std::uniform_real_distribution<double> lam(0.0, spec.overlap);
    std::uniform_int_distribution<std::size_t> other(0, spec.classes - 2);
    std::normal_distribution<double> noise(0.0, spec.noise_std);
    const double lambda = spec.overlap > 0.0 ? lam(rng) : 0.0;
    std::size_t partner = other(rng);
    if (partner >= static_cast<std::size_t>(y)) ++partner;
    Scalar* px = data.images.data() + i * per;
    for (std::size_t k = 0; k < per; ++k) {
      const double v = (1.0 - lambda) * protos[static_cast<std::size_t>(y)][k] + lambda * protos[partner][k] +
                       (spec.noise_std > 0.0 ? noise(rng) : 0.0);
      // Stored at float precision so a save/load cycle is lossless.
      px[k] = static_cast<Scalar>(static_cast<float>(std::clamp(v, 0.0, 1.0)));
    }
    data.labels[i] = y;
  }
  return data;
}

Dataset subsample(const Dataset& data, double data_ratio, std::uint64_t seed) {
  if (!(data_ratio > 0.0 && data_ratio <= 1.0)) throw InputError("data ratio must lie in (0, 1]");
  const std::size_t n = data.size();
  const auto keep = static_cast<std::size_t>(std::llround(data_ratio * static_cast<double>(n)));
  if (keep == 0) throw InputError("data ratio keeps no samples");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng(seed, "subsample");
  for (std::size_t i = 0; i < keep; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(perm[i], perm[pick(rng)]);
  }
  perm.resize(keep);
  std::sort(perm.begin(), perm.end());
  return data.select(perm);
}

std::vector<std::size_t> hardest_indices(std::span<const double> scores, double keep_frac) {
  if (!(keep_frac > 0.0 && keep_frac <= 1.0)) throw InputError("keep_frac must lie in (0, 1]");
  const std::size_t n = scores.size();
  // The small slack keeps e.g. 0.3 * 10 from rounding up to 4.
  const auto keep = std::min(n, static_cast<std::size_t>(std::ceil(keep_frac * static_cast<double>(n) - 1e-9)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

Dataset filter_hard(const Dataset& data, std::span<const double> scores, double keep_frac) {
  if (scores.size() != data.size()) throw InputError("one score per sample required");
  return data.select(hardest_indices(scores, keep_frac));
}

void save_split(const std::filesystem::path& dir, const Dataset& data) {
  std::filesystem::create_directories(dir);
  save_tensor_file(dir / (data.split + "_images.stns"), data.images, TensorDtype::f32);
  Tensor labels({data.size()});
  for (std::size_t i = 0; i < data.size(); ++i) labels[i] = static_cast<Scalar>(data.labels[i]);
  save_tensor_file(dir / (data.split + "_labels.stns"), labels, TensorDtype::u8);
}

Dataset load_split(const std::filesystem::path& dir, const std::string& split, std::size_t classes) {
  Dataset data;
  data.split = split;
  data.images = load_tensor_file(dir / (split + "_images.stns"));
  TensorDtype dtype{};
  const Tensor labels = load_tensor_file(dir / (split + "_labels.stns"), &dtype);
  if (dtype != TensorDtype::u8 || labels.rank() != 1) throw IoError(split + " labels must be a 1-D u8 tensor");
  int top = 0;
  for (Scalar v : labels.values()) {
    data.labels.push_back(static_cast<int>(v));
    top = std::max(top, static_cast<int>(v));
  }
  data.classes = classes ? classes : static_cast<std::size_t>(top) + 1;
  data.validate();
  return data;
}

DatasetPair load_dataset_dir(const std::filesystem::path& dir) {
  DatasetPair pair{load_split(dir, "train"), load_split(dir, "test")};
  const std::size_t classes = std::max(pair.train.classes, pair.test.classes);
  pair.train.classes = pair.test.classes = std::max<std::size_t>(classes, 2);
  return pair;
}

void save_dataset_dir(const std::filesystem::path& dir, const DatasetPair& data) {
  save_split(dir, data.train);
  save_split(dir, data.test);
}

}  // namespace sparselab
