#include "marn/evaluation.hpp"

#include "json.hpp"
#include "marn/binary_io.hpp"
#include "marn/error.hpp"

namespace marn {

std::uint64_t memory_digest(const MemoryBank& bank) { return io::fnv1a64(memory_file::serialize(bank)); }

EvalReport evaluate_corpus(const Dataset& data, const Vocabulary& vocab, Split split, const BasisModel& basis,
                           const MemoryDecoderModel* memory_decoder, const MemoryBank* memory,
                           const DecodeOptions& options) {
  if ((memory_decoder == nullptr) != (memory == nullptr))
    throw ContractViolation("memory decoder and memory bank must be supplied together");
  if (basis.dims().vocab_size != vocab.size())
    throw ShapeError("basis vocabulary size " + std::to_string(basis.dims().vocab_size) + " != vocabulary " +
                     std::to_string(vocab.size()));

  EvalReport report;
  report.split = to_string(split);
  report.with_memory = memory != nullptr;
  report.lambda = options.lambda;
  report.beam_width = options.beam_width;
  report.max_len = options.max_len;
  report.basis_digest = checkpoint::digest(basis.params());

  std::unique_ptr<CaptionGenerator> generator;
  if (memory) {
    if (memory->basis_digest != report.basis_digest)
      throw DataError("memory bank was built from basis " + io::hex64(memory->basis_digest) +
                      " but the supplied basis is " + io::hex64(report.basis_digest));
    memory_decoder->check_compatible(*memory);
    report.memory_digest = memory_digest(*memory);
    report.memdec_digest = checkpoint::digest(memory_decoder->params());
    generator = std::make_unique<CaptionGenerator>(basis, *memory_decoder, *memory);
  } else {
    generator = std::make_unique<CaptionGenerator>(basis);
  }

  const auto refs = data.manifest.references(split);
  std::vector<Sentence> candidates;
  std::vector<std::vector<Sentence>> references;
  for (const std::string& id : data.manifest.video_ids(split)) {
    VideoCaption vc;
    vc.video_id = id;
    vc.tokens = generator->generate(data.video(id), options);
    vc.words = decode_tokens(vc.tokens, vocab);
    auto it = refs.find(id);
    if (it == refs.end() || it->second.empty()) throw DataError("video " + id + " has no reference caption");
    vc.references = it->second;
    candidates.push_back(vc.words);
    references.push_back(vc.references);
    report.videos.push_back(std::move(vc));
  }
  if (candidates.empty()) throw DataError("split " + report.split + " has no videos");
  report.bleu4 = bleu4(candidates, references);
  report.rouge_l = rouge_l(candidates, references);
  report.cider = cider(candidates, references);
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["split"] = split;
  j["with_memory"] = with_memory;
  j["lambda"] = lambda;
  j["beam_width"] = beam_width;
  j["max_len"] = max_len;
  j["metrics"] = {{"bleu4", bleu4}, {"rouge_l", rouge_l}, {"cider", cider}};
  j["digests"]["basis"] = io::hex64(basis_digest);
  if (memory_digest) j["digests"]["memory"] = io::hex64(*memory_digest);
  if (memdec_digest) j["digests"]["memdec"] = io::hex64(*memdec_digest);
  auto& list = j["videos"] = nlohmann::ordered_json::array();
  for (const auto& v : videos) {
    nlohmann::ordered_json refs = nlohmann::ordered_json::array();
    for (const auto& r : v.references) refs.push_back(join_words(r));
    list.push_back({{"id", v.video_id}, {"caption", join_words(v.words)}, {"references", refs}});
  }
  return j.dump(2) + "\n";
}

std::string EvalReport::to_tsv() const {
  std::string out;
  for (const auto& v : videos) out += v.video_id + "\t" + join_words(v.words) + "\n";
  return out;
}

}  // namespace marn
