// SPDX-License-Identifier: Apache-2.0
#include "hnsa/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "hnsa/error.hpp"
#include "hnsa/hashing.hpp"
#include "json.hpp"

namespace hnsa {
namespace {

using nlohmann::json;

constexpr std::array<char, 8> kMagic = {'H', 'N', 'S', 'A', 'C', 'K', 'P', 'T'};

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes{};
  for (std::size_t i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw ParseError("truncated checkpoint header", 0);
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

json dims_to_json(const ModelDims& d) {
  return {{"embed_dim", d.embed_dim},
          {"hidden_dim", d.hidden_dim},
          {"attention_dim", d.attention_dim},
          {"max_utterance_len", d.max_utterance_len},
          {"max_dialog_len", d.max_dialog_len}};
}

ModelDims dims_from_json(const json& j) {
  ModelDims d;
  d.embed_dim = j.at("embed_dim").get<std::size_t>();
  d.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  d.attention_dim = j.at("attention_dim").get<std::size_t>();
  d.max_utterance_len = j.at("max_utterance_len").get<std::size_t>();
  d.max_dialog_len = j.at("max_dialog_len").get<std::size_t>();
  return d;
}

}  // namespace

void write_checkpoint(const Model& model, std::ostream& out) {
  const auto named = model.params.named_tensors();
  json params = json::array();
  for (const auto& n : named) params.push_back({{"name", n.name}, {"shape", n.tensor.shape()}});
  const std::vector<std::string> tokens(model.vocab.tokens().begin(), model.vocab.tokens().end());
  const json header = {{"format_version", kCheckpointVersion},
                       {"dims", dims_to_json(model.dims)},
                       {"attention_enabled", model.params.attention_enabled},
                       {"topics", model.topics},
                       {"vocab", tokens},
                       {"vocab_hash", hex64(model.vocab.hash())},
                       {"embedding_coverage", model.params.embeddings.coverage},
                       {"params", params}};
  const std::string text = header.dump();

  out.write(kMagic.data(), kMagic.size());
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::vector<char> buf;
  for (const auto& n : named) {
    const auto values = n.tensor.values();
    buf.resize(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
      for (std::size_t b = 0; b < 4; ++b) buf[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw Error("failed writing checkpoint");
}

Model read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw ParseError("not a checkpoint file (bad magic)", 0);
  }
  const std::uint64_t header_len = get_u64(in);
  if (header_len > (1ULL << 32)) throw ParseError("implausible checkpoint header length", 0);
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
    throw ParseError("truncated checkpoint header", 0);
  }

  Model model;
  std::vector<std::pair<std::string, ad::Shape>> declared;
  try {
    const json header = json::parse(text);
    const int version = header.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw ValidationError("unsupported checkpoint format version " + std::to_string(version));
    }
    model.dims = dims_from_json(header.at("dims"));
    model.topics = header.at("topics").get<std::vector<std::string>>();
    model.vocab = Vocab::from_tokens(header.at("vocab").get<std::vector<std::string>>());
    if (hex64(model.vocab.hash()) != header.at("vocab_hash").get<std::string>()) {
      throw ValidationError("checkpoint vocabulary does not match its recorded hash");
    }
    model.params = allocate_params(model.vocab.size(), model.topics.size(), model.dims,
                                   header.at("attention_enabled").get<bool>());
    model.params.embeddings.coverage = header.value("embedding_coverage", 0.0);
    for (const auto& p : header.at("params")) {
      declared.emplace_back(p.at("name").get<std::string>(), p.at("shape").get<ad::Shape>());
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid checkpoint header: ") + e.what(), 0);
  }

  auto named = model.params.named_tensors();
  if (declared.size() != named.size()) {
    throw ValidationError("checkpoint declares " + std::to_string(declared.size()) +
                          " parameters, expected " + std::to_string(named.size()));
  }
  std::vector<char> buf;
  for (std::size_t k = 0; k < named.size(); ++k) {
    auto& n = named[k];
    if (declared[k].first != n.name || declared[k].second != n.tensor.shape()) {
      throw ValidationError("checkpoint parameter " + declared[k].first + " " +
                            ad::shape_string(declared[k].second) + " does not match expected " +
                            n.name + " " + ad::shape_string(n.tensor.shape()));
    }
    auto values = n.tensor.mutable_values();
    buf.resize(values.size() * 4);
    if (!in.read(buf.data(), static_cast<std::streamsize>(buf.size()))) {
      throw ParseError("truncated checkpoint payload in " + n.name, 0);
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::uint32_t bits = 0;
      for (std::size_t b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i * 4 + b])) << (8 * b);
      }
      values[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  write_checkpoint(model, out);
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace hnsa
