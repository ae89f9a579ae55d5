#include "sparselab/el2n.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "sparselab/error.hpp"
#include "sparselab/ops.hpp"

namespace sparselab {

double el2n_distance(std::span<const Scalar> probabilities, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probabilities.size()) throw InputError("label out of range");
  double sum = 0.0;
  for (std::size_t c = 0; c < probabilities.size(); ++c) {
    const double diff = static_cast<double>(probabilities[c]) - (c == static_cast<std::size_t>(label) ? 1.0 : 0.0);
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

std::vector<ScoreRecord> el2n_score(std::span<Model* const> models, const Dataset& data, const std::string& scorer,
                                    std::size_t batch_size) {
  if (models.empty()) throw InputError("EL2N scoring needs at least one model");
  if (batch_size == 0) throw InputError("batch size must be positive");
  const std::size_t n = data.size();
  std::vector<double> sums(n, 0.0);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (Model* model : models) {
    if (model->spec().classes != data.classes) throw InputError("scoring model class count differs from dataset");
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t len = std::min(batch_size, n - start);
      const std::span<const std::size_t> batch(idx.data() + start, len);
      const Tensor probs = softmax(model->predict(data.gather_images(batch)));
      const std::size_t c = probs.dim(1);
      for (std::size_t i = 0; i < len; ++i) {
        sums[start + i] += el2n_distance(probs.values().subspan(i * c, c), data.labels[start + i]);
      }
    }
  }
  std::vector<ScoreRecord> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {i, sums[i] / static_cast<double>(models.size()), scorer};
  return out;
}

std::vector<double> score_values(std::span<const ScoreRecord> records, std::size_t expected_size) {
  if (records.size() != expected_size) {
    throw InputError("have " + std::to_string(records.size()) + " scores for " + std::to_string(expected_size) + " samples");
  }
  std::vector<double> values(expected_size);
  std::vector<bool> seen(expected_size, false);
  for (const auto& r : records) {
    if (r.index >= expected_size || seen[r.index]) throw InputError("score indices must cover every sample once");
    seen[r.index] = true;
    values[r.index] = r.el2n;
  }
  return values;
}

void write_score_csv(std::ostream& os, std::span<const ScoreRecord> records) {
  os << "index,el2n\n";
  for (const auto& r : records) os << r.index << ',' << std::fixed << std::setprecision(6) << r.el2n << '\n';
}

std::vector<ScoreRecord> read_score_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "index,el2n") throw IoError("score CSV: expected header 'index,el2n'");
  std::vector<ScoreRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("score CSV: malformed row '" + line + "'");
    try {
      out.push_back({std::stoul(line.substr(0, comma)), std::stod(line.substr(comma + 1)), "csv"});
    } catch (const std::exception&) {
      throw IoError("score CSV: malformed row '" + line + "'");
    }
  }
  return out;
}

}  // namespace sparselab
