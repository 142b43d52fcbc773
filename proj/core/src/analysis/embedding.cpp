#include "tst/analysis/embedding.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include "tst/errors.hpp"

namespace tst::analysis {

std::vector<std::vector<std::vector<double>>> collect_stage_features(const TSTModel<float>& model,
                                                                     const std::vector<LabeledWindow>& windows,
                                                                     std::size_t batch_size) {
  if (windows.empty()) throw DataError("no windows to embed");
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  const std::size_t depth = model.config().depth;
  std::vector<std::vector<std::vector<double>>> stages(depth + 1);

  NoGradGuard no_grad;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < windows.size(); start += batch_size) {
    const std::size_t end = std::min(windows.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Batch<float> batch = make_batch<float>(windows, idx);
    const auto out = model.forward(batch.inputs);

    const std::size_t len = batch.inputs.extent(1);
    const float* raw = batch.inputs.data().data();
    for (std::size_t b = 0; b < idx.size(); ++b) stages[0].emplace_back(raw + b * len, raw + (b + 1) * len);
    for (std::size_t l = 0; l < depth; ++l) {
      const auto& tok = out.class_tokens[l];
      const std::size_t dim = tok.extent(-1);
      const float* d = tok.data().data();
      for (std::size_t b = 0; b < idx.size(); ++b) stages[l + 1].emplace_back(d + b * dim, d + (b + 1) * dim);
    }
  }
  return stages;
}

std::vector<EmbeddingPoint> embed_class_tokens(const TSTModel<float>& model, const std::vector<LabeledWindow>& windows,
                                               const EmbeddingOptions& options) {
  options.tsne.validate();
  if (3.0 * options.tsne.perplexity > static_cast<double>(windows.size()))
    throw ConfigError("perplexity " + std::to_string(options.tsne.perplexity) + " is larger than n/3 for " +
                      std::to_string(windows.size()) + " samples");
  const auto stages = collect_stage_features(model, windows, options.batch_size);
  const std::size_t n = windows.size();
  std::vector<TsneResult> results(stages.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t s; (s = next.fetch_add(1)) < stages.size();) {
      try {
        results[s] = tsne_embed(stages[s], options.tsne);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  {
    const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, stages.size());
    std::vector<std::jthread> pool;
    for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<EmbeddingPoint> points;
  points.reserve(stages.size() * n);
  for (std::size_t s = 0; s < stages.size(); ++s)
    for (std::size_t i = 0; i < n; ++i)
      points.push_back({results[s].coords[i][0], results[s].coords[i][1], windows[i].label, s});
  return points;
}

void write_embedding_csv(std::ostream& out, const std::vector<EmbeddingPoint>& points) {
  out << "block_index,label,x,y\n";
  char buf[64];
  for (const auto& p : points) {
    out << p.block_index << ',' << p.label << ',';
    out.write(buf, std::to_chars(buf, buf + sizeof buf, p.x).ptr - buf);
    out << ',';
    out.write(buf, std::to_chars(buf, buf + sizeof buf, p.y).ptr - buf);
    out << '\n';
  }
}

std::vector<EmbeddingPoint> export_embeddings(const TSTModel<float>& model, const std::vector<LabeledWindow>& windows,
                                              const std::string& path, const EmbeddingOptions& options) {
  auto points = embed_class_tokens(model, windows, options);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_embedding_csv(out, points);
  if (!out.flush()) throw IoError("failed writing " + path);
  return points;
}

}  // namespace tst::analysis
