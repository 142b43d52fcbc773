#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tst/analysis/tsne.hpp"
#include "tst/data.hpp"
#include "tst/model.hpp"

namespace tst::analysis {

struct EmbeddingPoint {
  double x = 0.0;
  double y = 0.0;
  int label = 0;
  /// 0 is the standardized raw input, 1..depth the class token after that block.
  std::size_t block_index = 0;
};

struct EmbeddingOptions {
  TsneOptions tsne;
  std::size_t batch_size = 256;
  /// Stages are embedded independently and may run in parallel.
  std::size_t jobs = 1;
};

/// Per-stage features in eval mode: stage 0 is [n, L], stage l is [n, dim].
std::vector<std::vector<std::vector<double>>> collect_stage_features(const TSTModel<float>& model,
                                                                     const std::vector<LabeledWindow>& windows,
                                                                     std::size_t batch_size = 256);

/// (depth + 1) * n points ordered by stage, then by sample.
std::vector<EmbeddingPoint> embed_class_tokens(const TSTModel<float>& model, const std::vector<LabeledWindow>& windows,
                                               const EmbeddingOptions& options = {});

/// Header "block_index,label,x,y"; coordinates use shortest round-trip form.
void write_embedding_csv(std::ostream& out, const std::vector<EmbeddingPoint>& points);

/// embed_class_tokens followed by write_embedding_csv to `path` (IoError on failure).
std::vector<EmbeddingPoint> export_embeddings(const TSTModel<float>& model, const std::vector<LabeledWindow>& windows,
                                              const std::string& path, const EmbeddingOptions& options = {});

}  // namespace tst::analysis
