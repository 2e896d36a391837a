#include "marn/gradcheck.hpp"

#include <random>

namespace marn {

MicroSetup make_micro_setup(std::uint64_t seed) {
  ModelDims dims{10, 6, 8, 8, 8, 8, 12};
  constexpr std::size_t L = 6, N = 2, U = 3, k = 2;
  std::mt19937_64 rng(seed * 7919 + 17);
  std::normal_distribution<double> normal(0.0, 1.0);

  VideoFeatures video;
  video.id = "micro";
  video.frames = Tensor(Shape{L, dims.frame_dim});
  video.clips = Tensor(Shape{N, dims.clip_dim});
  for (double& v : video.frames.data()) v = normal(rng);
  for (double& v : video.clips.data()) v = normal(rng);
  video.category = 1;

  BasisModel basis = BasisModel::create(dims, seed);
  const std::vector<TokenId> caption{Vocabulary::kBos, 5, 9, 4, 11, Vocabulary::kEos};

  // Memory from the attention of the one caption; words it lacks get zero g.
  const TeacherForcedResult pass = forward_teacher_forced(basis, video, caption);
  ProjectedLookup projected{{video.id, project_video(basis, video)}};
  MemoryBank bank;
  bank.k = k;
  bank.proj_dim = dims.proj_dim;
  bank.embed_dim = dims.embed_dim;
  bank.category_dim = U;
  bank.basis_digest = checkpoint::digest(basis.params());
  const Tensor& E = basis.params()["dec/E"];
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (TokenId w = 0; w < dims.vocab_size; ++w) {
    std::vector<AttentionRecord> records;
    for (std::size_t t = 1; t < caption.size(); ++t) {
      if (caption[t] != w) continue;
      const auto r2 = pass.attention2d.row(t - 1);
      const auto r3 = pass.attention3d.row(t - 1);
      records.push_back({w, video.id, Tensor::vector(std::vector<double>(r2.begin(), r2.end())),
                         Tensor::vector(std::vector<double>(r3.begin(), r3.end()))});
    }
    MemoryEntry entry;
    entry.word = w;
    entry.occurrences = static_cast<std::uint32_t>(records.size());
    entry.g = build_visual_context(records, projected, k, dims.proj_dim);
    entry.e = Tensor(Shape{dims.embed_dim});
    for (std::size_t i = 0; i < dims.embed_dim; ++i) entry.e[i] = E.at(i, w);
    entry.u = Tensor(Shape{U});
    double total = 0.0;
    for (double& v : entry.u.data()) total += (v = unit(rng));
    for (double& v : entry.u.data()) v /= total;
    bank.entries.push_back(std::move(entry));
  }

  MemoryDecoderDims mdims{8, dims.proj_dim, dims.embed_dim, dims.hidden_dim, U};
  MemoryDecoderModel memdec = MemoryDecoderModel::create(mdims, seed + 1);
  return MicroSetup{dims, std::move(basis), std::move(memdec), std::move(bank), std::move(video), caption};
}

MicroGradCheck micro_grad_check(std::uint64_t seed, double beta, double h) {
  MicroSetup s = make_micro_setup(seed);
  MicroGradCheck out;

  auto combined = [&](Tape& tape, std::span<const Var> vars) {
    const BasisGraph g = BasisGraph::from_vars(vars, s.dims);
    return basis_caption_loss(tape, g, s.video, s.caption, beta).total;
  };
  out.combined = grad_check(combined, s.basis.params().pointers(), h);

  const FrozenSample frozen = freeze_sample(s.basis, s.video, s.caption);
  const MemoryDecoderDims mdims = s.memdec.dims();
  auto memory = [&](Tape& tape, std::span<const Var> vars) {
    const MemoryGraph g = MemoryGraph::from_vars(vars, mdims);
    return memory_caption_loss(tape, g, memory_keys(tape, g, s.bank), frozen);
  };
  out.memory = grad_check(memory, s.memdec.params().pointers(), h);
  return out;
}

}  // namespace marn
