#include "marn/memory_builder.hpp"

#include <algorithm>
#include <numeric>

#include "marn/binary_io.hpp"
#include "marn/error.hpp"
#include "marn/log.hpp"

namespace marn {

std::vector<AttentionRecord> collect_attention_records(const BasisModel& model, const Dataset& data,
                                                       const Vocabulary& vocab, Split split) {
  std::vector<AttentionRecord> records;
  for (const CaptionSample& sample : data.manifest.samples(split, vocab)) {
    const VideoFeatures& video = data.video(sample.video_id);
    const TeacherForcedResult pass = forward_teacher_forced(model, video, sample.token_ids);
    for (std::size_t t = 1; t < sample.token_ids.size(); ++t) {
      const TokenId word = sample.token_ids[t];
      if (word == Vocabulary::kPad || word == Vocabulary::kBos) continue;
      const auto row2 = pass.attention2d.row(t - 1);
      const auto row3 = pass.attention3d.row(t - 1);
      records.push_back(AttentionRecord{word, sample.video_id, Tensor::vector(std::vector<double>(row2.begin(), row2.end())),
                                        Tensor::vector(std::vector<double>(row3.begin(), row3.end()))});
    }
  }
  return records;
}

ProjectedVideo project_video(const BasisModel& model, const VideoFeatures& video) {
  Tape tape;
  BasisGraph g = BasisGraph::bind(tape, model, false);
  ProjectedFeatures p = project_features(tape, g, video);
  return ProjectedVideo{p.frames.value(), p.clips.value()};
}

namespace {

// Indices of the k largest weights, largest first, lower index first on ties.
std::vector<std::size_t> top_k(const Tensor& weights, std::size_t k) {
  std::vector<std::size_t> idx(weights.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

void accumulate_stream(const Tensor& weights, const Tensor& features, std::size_t k, std::vector<double>& numerator,
                       double& mass) {
  if (weights.size() != features.rows())
    throw ShapeError("attention row of length " + std::to_string(weights.size()) + " against " +
                     std::to_string(features.rows()) + " feature rows");
  for (std::size_t j : top_k(weights, k)) {
    const double a = weights[j];
    const auto f = features.row(j);
    for (std::size_t c = 0; c < numerator.size(); ++c) numerator[c] += a * f[c];
    mass += a;
  }
}

}  // namespace

Tensor build_visual_context(std::span<const AttentionRecord> records, const ProjectedLookup& projected,
                            std::size_t k, std::size_t proj_dim) {
  if (k < 1) throw ConfigError("top-k needs k >= 1");
  Tensor g(Shape{proj_dim}, 0.0);
  if (records.empty()) return g;

  std::vector<double> num2(proj_dim, 0.0), num3(proj_dim, 0.0);
  double mass2 = 0.0, mass3 = 0.0;
  bool truncated = false;
  for (const AttentionRecord& rec : records) {
    auto it = projected.find(rec.video_id);
    if (it == projected.end()) throw DataError("no projected features for video " + rec.video_id);
    const ProjectedVideo& pv = it->second;
    if (pv.frames.cols() != proj_dim || pv.clips.cols() != proj_dim)
      throw ShapeError("projected features of " + rec.video_id + " do not have width " + std::to_string(proj_dim));
    truncated = truncated || k > rec.weights2d.size() || k > rec.weights3d.size();
    accumulate_stream(rec.weights2d, pv.frames, k, num2, mass2);
    accumulate_stream(rec.weights3d, pv.clips, k, num3, mass3);
  }
  if (truncated) log::warn_once("top-k k=" + std::to_string(k) + " exceeds the available frames or clips; truncated");
  for (std::size_t c = 0; c < proj_dim; ++c) g[c] = num2[c] / mass2 + num3[c] / mass3;
  return g;
}

Tensor build_auxiliary(std::span<const AttentionRecord> records, const Dataset& data, std::size_t category_count) {
  if (category_count == 0) return Tensor{};
  Tensor u(Shape{category_count}, 0.0);
  double total = 0.0;
  for (const AttentionRecord& rec : records) {
    const auto& category = data.video(rec.video_id).category;
    if (!category) continue;
    if (*category < 0 || static_cast<std::size_t>(*category) >= category_count)
      throw DataError("video " + rec.video_id + " has category " + std::to_string(*category) + " outside [0, " +
                      std::to_string(category_count) + ")");
    u[static_cast<std::size_t>(*category)] += 1.0;
    total += 1.0;
  }
  if (total > 0.0)
    for (double& x : u.data()) x /= total;
  return u;
}

namespace {

Tensor stack_rows(const std::vector<MemoryEntry>& entries, Tensor MemoryEntry::*field, std::size_t width) {
  Tensor out(Shape{entries.size(), width}, 0.0);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Tensor& src = entries[i].*field;
    std::copy(src.data().begin(), src.data().end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

Tensor MemoryBank::g_matrix() const { return stack_rows(entries, &MemoryEntry::g, proj_dim); }
Tensor MemoryBank::e_matrix() const { return stack_rows(entries, &MemoryEntry::e, embed_dim); }
Tensor MemoryBank::u_matrix() const {
  if (category_dim == 0) throw ContractViolation("memory has no auxiliary features");
  return stack_rows(entries, &MemoryEntry::u, category_dim);
}

MemoryBank assemble_memory(const BasisModel& model, const Dataset& data, const Vocabulary& vocab, std::size_t k,
                           Split split) {
  if (k < 1) throw ConfigError("top-k needs k >= 1");
  const ModelDims& dims = model.dims();
  if (vocab.size() != dims.vocab_size)
    throw DataError("vocabulary has " + std::to_string(vocab.size()) + " tokens, model expects " +
                    std::to_string(dims.vocab_size));
  const auto records = collect_attention_records(model, data, vocab, split);

  ProjectedLookup projected;
  for (const auto& rec : records)
    if (!projected.count(rec.video_id)) projected.emplace(rec.video_id, project_video(model, data.video(rec.video_id)));

  std::vector<std::vector<AttentionRecord>> by_word(dims.vocab_size);
  for (const auto& rec : records) by_word[rec.word].push_back(rec);

  MemoryBank bank;
  bank.k = k;
  bank.proj_dim = dims.proj_dim;
  bank.embed_dim = dims.embed_dim;
  bank.category_dim = data.category_count();
  bank.basis_digest = checkpoint::digest(model.params());
  const Tensor& E = model.params()["dec/E"];
  for (TokenId r = 0; r < dims.vocab_size; ++r) {
    MemoryEntry entry;
    entry.word = r;
    entry.occurrences = static_cast<std::uint32_t>(by_word[r].size());
    entry.g = build_visual_context(by_word[r], projected, k, dims.proj_dim);
    entry.e = Tensor(Shape{dims.embed_dim});
    for (std::size_t i = 0; i < dims.embed_dim; ++i) entry.e[i] = E.at(i, r);
    entry.u = build_auxiliary(by_word[r], data, bank.category_dim);
    bank.entries.push_back(std::move(entry));
  }
  return bank;
}

namespace memory_file {

namespace {
constexpr std::string_view kMagic = "MARNM";
}

std::vector<char> serialize(const MemoryBank& bank) {
  io::ByteWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(bank.entries.size()));
  w.u32(static_cast<std::uint32_t>(bank.proj_dim));
  w.u32(static_cast<std::uint32_t>(bank.embed_dim));
  w.u32(static_cast<std::uint32_t>(bank.category_dim));
  w.u32(static_cast<std::uint32_t>(bank.k));
  for (const auto& e : bank.entries) {
    if (e.g.size() != bank.proj_dim || e.e.size() != bank.embed_dim || e.u.size() != bank.category_dim)
      throw ShapeError("memory entry " + std::to_string(e.word) + " does not match the bank dimensions");
    w.u32(e.occurrences);
    w.f32_run(e.g.data());
    w.f32_run(e.e.data());
    w.f32_run(e.u.data());
  }
  w.u64(bank.basis_digest);
  return w.buffer();
}

MemoryBank deserialize(std::span<const char> bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  if (bytes.size() < kMagic.size() || r.bytes(kMagic.size(), "magic") != kMagic)
    throw FormatError(source + ": not a MARNM memory file (bad magic)");
  const auto version = r.u32("version");
  if (version != kVersion) throw FormatError(source + ": unsupported MARNM version " + std::to_string(version));
  MemoryBank bank;
  const auto K = r.u32("K");
  bank.proj_dim = r.u32("m");
  bank.embed_dim = r.u32("d'");
  bank.category_dim = r.u32("U");
  bank.k = r.u32("k");
  if (bank.proj_dim == 0 || bank.embed_dim == 0 || bank.k == 0)
    throw FormatError(source + ": memory dimensions and k must be positive");
  for (TokenId i = 0; i < K; ++i) {
    MemoryEntry e;
    e.word = i;
    e.occurrences = r.u32("occurrence count");
    e.g = Tensor(Shape{bank.proj_dim}, r.f32_run(bank.proj_dim, "g"));
    e.e = Tensor(Shape{bank.embed_dim}, r.f32_run(bank.embed_dim, "e"));
    if (bank.category_dim > 0) e.u = Tensor(Shape{bank.category_dim}, r.f32_run(bank.category_dim, "u"));
    bank.entries.push_back(std::move(e));
  }
  bank.basis_digest = r.u64("basis digest");
  if (r.remaining() != 0) throw CorruptionError(source + ": trailing bytes after memory payload", r.offset());
  return bank;
}

void save(const std::filesystem::path& path, const MemoryBank& bank) { io::write_file(path, serialize(bank)); }

MemoryBank load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing memory file " + path.string());
  return deserialize(io::read_file(path), path.string());
}

}  // namespace memory_file
}  // namespace marn
