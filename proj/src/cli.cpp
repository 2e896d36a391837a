#include "marn/cli.hpp"

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "marn/binary_io.hpp"
#include "marn/config.hpp"
#include "marn/error.hpp"
#include "marn/evaluation.hpp"
#include "marn/gradcheck.hpp"
#include "marn/log.hpp"
#include "marn/memory_builder.hpp"
#include "marn/synthetic.hpp"

namespace fs = std::filesystem;

namespace marn::cli {

namespace {

constexpr const char* kBasisFile = "basis.marnc";
constexpr const char* kVocabFile = "vocab.txt";
constexpr const char* kMemoryFile = "memory.marnm";
constexpr const char* kMemdecFile = "memdec.marnc";
constexpr const char* kFusionFile = "fusion.json";
constexpr const char* kDigestFile = "digests.json";

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<double> beta;
  std::optional<std::size_t> k;
  std::string dims;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> beam;
  std::string out;
  std::string data;
  std::string basis;
  std::string memory;
  std::string memdec;
  std::string split = "test";
  bool basis_only = false;
  bool verbose = false;
};

RunConfig resolve_config(const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.lambda) c.lambda = *f.lambda;
  if (f.beta) c.basis_train.beta = *f.beta;
  if (f.k) c.k = *f.k;
  if (!f.dims.empty()) parse_dims(f.dims, c.dims);
  if (f.epochs) {
    c.basis_train.epochs = *f.epochs;
    c.memory_train.epochs = *f.epochs;
  }
  if (f.beam) c.beam_width = *f.beam;
  if (!f.data.empty()) c.manifest = f.data;
  c.resolve();
  c.validate();
  return c;
}

fs::path require_out(const Flags& f) {
  if (f.out.empty()) throw ConfigError("--out <dir> is required");
  fs::create_directories(f.out);
  return f.out;
}

fs::path input_dir(const std::string& flag, const Flags& f) { return flag.empty() ? fs::path(f.out) : fs::path(flag); }

Dataset load_dataset(const RunConfig& c) {
  if (c.manifest.empty()) throw ConfigError("a dataset manifest is required (--data or data.manifest)");
  return Dataset::load(c.manifest);
}

nlohmann::ordered_json read_digests(const fs::path& dir) {
  const fs::path p = dir / kDigestFile;
  if (!fs::exists(p)) return nlohmann::ordered_json::object();
  return nlohmann::ordered_json::parse(io::read_text(p));
}

void write_digests(const fs::path& dir, const nlohmann::ordered_json& j) {
  io::write_text(dir / kDigestFile, j.dump(2) + "\n");
}

void write_config(const fs::path& dir, const RunConfig& c) { io::write_text(dir / "run_config.json", c.to_json()); }

struct Pipeline {
  Vocabulary vocab;
  BasisModel basis;
};

Pipeline load_basis(const fs::path& dir) {
  return Pipeline{Vocabulary::load(dir / kVocabFile), BasisModel::from_params(checkpoint::load(dir / kBasisFile))};
}

std::string fixed(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed << v;
  return os.str();
}

int run_synth(const Flags& f, const RunConfig& c, std::ostream& out) {
  const fs::path dir = require_out(f);
  const SyntheticDataset data = generate_synthetic_dataset(c.synth);
  write_synthetic_dataset(data, dir);
  write_config(dir, c);
  out << "wrote " << data.videos.size() << " videos to " << dir.string() << "\n";
  return 0;
}

int run_train_basis(const Flags& f, const RunConfig& c, std::ostream& out) {
  const fs::path dir = require_out(f);
  const Dataset data = load_dataset(c);
  const Vocabulary vocab = Vocabulary::build(data.manifest.tokenized_captions(Split::train), c.min_count);
  ModelDims dims = c.dims;
  dims.frame_dim = data.frame_dim();
  dims.clip_dim = data.clip_dim();
  dims.vocab_size = vocab.size();
  write_config(dir, c);

  BasisTrainingResult r = train_basis(data, vocab, dims, c.basis_train);
  vocab.save(dir / kVocabFile);
  checkpoint::save(dir / kBasisFile, r.best.params());
  io::write_text(dir / "basis_report.json", r.report.to_json());

  nlohmann::ordered_json d;
  d["seed"] = c.seed;
  d["basis"] = io::hex64(checkpoint::digest(r.best.params()));
  write_digests(dir, d);
  out << "basis selected epoch " << r.report.selected_epoch << " digest " << d["basis"].get<std::string>() << "\n";
  return 0;
}

int run_build_memory(const Flags& f, const RunConfig& c, std::ostream& out) {
  const fs::path dir = require_out(f);
  const Dataset data = load_dataset(c);
  const Pipeline p = load_basis(input_dir(f.basis, f));
  write_config(dir, c);
  const MemoryBank bank = assemble_memory(p.basis, data, p.vocab, c.k);
  memory_file::save(dir / kMemoryFile, bank);

  nlohmann::ordered_json d = read_digests(dir);
  d["seed"] = c.seed;
  d["basis"] = io::hex64(bank.basis_digest);
  d["memory"] = io::hex64(memory_digest(bank));
  d.erase("memdec");
  write_digests(dir, d);
  out << "memory of " << bank.size() << " words, k=" << bank.k << " digest " << d["memory"].get<std::string>()
      << "\n";
  return 0;
}

int run_train_memory(const Flags& f, const RunConfig& c, std::ostream& out) {
  const fs::path dir = require_out(f);
  const Dataset data = load_dataset(c);
  const Pipeline p = load_basis(input_dir(f.basis, f));
  const MemoryBank bank = memory_file::load(input_dir(f.memory, f) / kMemoryFile);
  write_config(dir, c);

  MemoryTrainingResult r = train_memory_decoder(p.basis, bank, data, p.vocab, c.memdec_attn_dim, c.memory_train);
  checkpoint::save(dir / kMemdecFile, r.best.params());
  io::write_text(dir / "memdec_report.json", r.report.to_json());
  io::write_text(dir / kFusionFile, nlohmann::ordered_json{{"lambda", r.lambda}}.dump(2) + "\n");

  nlohmann::ordered_json d = read_digests(dir);
  d["seed"] = c.seed;
  d["basis"] = io::hex64(bank.basis_digest);
  d["memory"] = io::hex64(memory_digest(bank));
  d["memdec"] = io::hex64(checkpoint::digest(r.best.params()));
  write_digests(dir, d);
  out << "memory decoder selected epoch " << r.report.selected_epoch << ", lambda " << r.lambda << "\n";
  return 0;
}

struct Decoder {
  Pipeline basis;
  std::optional<MemoryDecoderModel> memdec;
  std::optional<MemoryBank> bank;
  DecodeOptions options;
};

Decoder load_decoder(const Flags& f, const RunConfig& c) {
  Decoder d{load_basis(input_dir(f.basis, f)), std::nullopt, std::nullopt, {}};
  d.options.beam_width = c.beam_width;
  d.options.max_len = c.max_len;
  const fs::path memdec_dir = input_dir(f.memdec, f);
  if (!f.basis_only && fs::exists(memdec_dir / kMemdecFile)) {
    d.memdec = MemoryDecoderModel::from_params(checkpoint::load(memdec_dir / kMemdecFile));
    d.bank = memory_file::load(input_dir(f.memory, f) / kMemoryFile);
    if (c.lambda) {
      d.options.lambda = *c.lambda;
    } else if (fs::exists(memdec_dir / kFusionFile)) {
      d.options.lambda = nlohmann::json::parse(io::read_text(memdec_dir / kFusionFile)).at("lambda").get<double>();
    }
  }
  return d;
}

int run_caption(const Flags& f, const RunConfig& c, std::ostream& out) {
  const fs::path dir = require_out(f);
  const Dataset data = load_dataset(c);
  const Decoder d = load_decoder(f, c);
  const Split split = parse_split(f.split);
  std::unique_ptr<CaptionGenerator> gen =
      d.memdec ? std::make_unique<CaptionGenerator>(d.basis.basis, *d.memdec, *d.bank)
               : std::make_unique<CaptionGenerator>(d.basis.basis);
  std::string tsv;
  for (const std::string& id : data.manifest.video_ids(split)) {
    const auto words = decode_tokens(gen->generate(data.video(id), d.options), d.basis.vocab);
    tsv += id + "\t" + join_words(words) + "\n";
  }
  write_config(dir, c);
  io::write_text(dir / ("captions_" + f.split + ".tsv"), tsv);
  out << tsv;
  return 0;
}

int run_eval(const Flags& f, const RunConfig& c, std::ostream& out) {
  const fs::path dir = require_out(f);
  const Dataset data = load_dataset(c);
  const Decoder d = load_decoder(f, c);
  const Split split = parse_split(f.split);
  const EvalReport report =
      evaluate_corpus(data, d.basis.vocab, split, d.basis.basis, d.memdec ? &*d.memdec : nullptr,
                      d.bank ? &*d.bank : nullptr, d.options);
  write_config(dir, c);
  const std::string stem = "eval_" + f.split + (d.memdec ? "" : "_basis");
  io::write_text(dir / (stem + ".json"), report.to_json());
  io::write_text(dir / (stem + ".tsv"), report.to_tsv());
  out << "split " << report.split << (report.with_memory ? " lambda " + fixed(report.lambda) : " basis-only")
      << "\nBLEU-4  " << fixed(report.bleu4) << "\nROUGE-L " << fixed(report.rouge_l) << "\nCIDEr   "
      << fixed(report.cider) << "\n";
  return 0;
}

int run_gradcheck(const RunConfig& c, const std::optional<double>& beta, std::ostream& out) {
  const MicroGradCheck r = micro_grad_check(c.seed, beta.value_or(c.basis_train.beta));
  out << std::scientific << std::setprecision(3) << "combined loss max relative error " << r.combined.max_rel_error
      << " over " << r.combined.coordinates << " coordinates\n"
      << "memory loss max relative error " << r.memory.max_rel_error << " over " << r.memory.coordinates
      << " coordinates\n"
      << "max relative error " << r.max_rel_error() << "\n";
  return r.max_rel_error() < 1e-4 ? 0 : 3;
}

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON run configuration");
  app->add_option("--seed", f.seed, "random seed");
  app->add_option("--out", f.out, "output (run) directory");
  app->add_flag("-v,--verbose", f.verbose, "per-epoch progress on stderr");
}

void add_data(CLI::App* app, Flags& f) { app->add_option("--data", f.data, "dataset manifest.json"); }

void add_model(CLI::App* app, Flags& f) {
  app->add_option("--dims", f.dims, "m,H,A,d'");
  app->add_option("--epochs", f.epochs, "training epochs");
  app->add_option("--beta", f.beta, "AC-loss weight");
}

void add_decode(CLI::App* app, Flags& f) {
  app->add_option("--lambda", f.lambda, "fusion weight in [0,1]");
  app->add_option("--beam", f.beam, "beam width (1 = greedy)");
  app->add_option("--split", f.split, "train | val | test");
  app->add_option("--memory", f.memory, "directory holding memory.marnm");
  app->add_option("--memdec", f.memdec, "directory holding memdec.marnc");
  app->add_flag("--basis-only", f.basis_only, "ignore any memory decoder");
}

}  // namespace

int dispatch(int argc, const char* const* argv) { return dispatch(argc, argv, std::cout, std::cerr); }

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Memory-attended recurrent captioning"};
  app.name("marn");
  app.require_subcommand(1, 1);
  Flags f;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth, f);
  auto* train_basis_cmd = app.add_subcommand("train-basis", "train the basis decoder");
  add_common(train_basis_cmd, f);
  add_data(train_basis_cmd, f);
  add_model(train_basis_cmd, f);
  auto* build_memory = app.add_subcommand("build-memory", "build the word memory from a basis checkpoint");
  add_common(build_memory, f);
  add_data(build_memory, f);
  build_memory->add_option("--k", f.k, "top-k frames/clips per occurrence");
  build_memory->add_option("--basis", f.basis, "directory holding basis.marnc and vocab.txt");
  auto* train_memory = app.add_subcommand("train-memory", "train the memory decoder and tune lambda");
  add_common(train_memory, f);
  add_data(train_memory, f);
  train_memory->add_option("--epochs", f.epochs, "training epochs");
  train_memory->add_option("--basis", f.basis, "directory holding basis.marnc and vocab.txt");
  train_memory->add_option("--memory", f.memory, "directory holding memory.marnm");
  auto* caption = app.add_subcommand("caption", "caption every video of a split");
  add_common(caption, f);
  add_data(caption, f);
  add_decode(caption, f);
  caption->add_option("--basis", f.basis, "directory holding basis.marnc and vocab.txt");
  auto* eval = app.add_subcommand("eval", "caption and score a split");
  add_common(eval, f);
  add_data(eval, f);
  add_decode(eval, f);
  eval->add_option("--basis", f.basis, "directory holding basis.marnc and vocab.txt");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of both losses on a micro model");
  gradcheck->add_option("--seed", f.seed, "random seed");
  gradcheck->add_option("--beta", f.beta, "AC-loss weight");
  gradcheck->add_option("--config", f.config, "JSON run configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "marn: " << e.what() << "\n" << app.help();
    return 1;
  }

  log::set_verbose(f.verbose);
  try {
    const RunConfig c = resolve_config(f);
    if (synth->parsed()) return run_synth(f, c, out);
    if (train_basis_cmd->parsed()) return run_train_basis(f, c, out);
    if (build_memory->parsed()) return run_build_memory(f, c, out);
    if (train_memory->parsed()) return run_train_memory(f, c, out);
    if (caption->parsed()) return run_caption(f, c, out);
    if (eval->parsed()) return run_eval(f, c, out);
    if (gradcheck->parsed()) return run_gradcheck(c, f.beta, out);
    err << app.help();
    return 1;
  } catch (const ConfigError& e) {
    err << "marn: configuration error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    err << "marn: numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "marn: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace marn::cli
