#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sparselab/dataset.hpp"
#include "sparselab/model.hpp"

namespace sparselab {

struct ScoreRecord {
  std::size_t index = 0;
  double el2n = 0.0;    // in [0, sqrt(2)]
  std::string scorer;   // identifies the scoring model(s)
};

// || p - onehot(label) ||_2 for one probability row.
double el2n_distance(std::span<const Scalar> probabilities, int label);

// Per sample, the mean over `models` of ||softmax(f(x)) - onehot(y)||_2.
std::vector<ScoreRecord> el2n_score(std::span<Model* const> models, const Dataset& data,
                                    const std::string& scorer = "el2n", std::size_t batch_size = 256);

std::vector<double> score_values(std::span<const ScoreRecord> records, std::size_t expected_size);

// CSV `index,el2n`, six decimals.
void write_score_csv(std::ostream& os, std::span<const ScoreRecord> records);
std::vector<ScoreRecord> read_score_csv(std::istream& is);

}  // namespace sparselab
