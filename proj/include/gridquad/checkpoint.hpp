#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "gridquad/error.hpp"
#include "gridquad/train.hpp"

namespace gridquad {

// Checkpoint layout (all integers little-endian):
//   8 bytes   magic "GQCKPT\0\1"
//   u32       format version (1)
//   u64       header length H
//   H bytes   UTF-8 JSON header: {"version", "config", "dims", "token_vocab", "pos_vocab",
//             "tensors": [{"name", "shape": [rows, cols]}, ...]}
//   doubles   every tensor's entries, column-major, in header order (IEEE-754 binary64 LE)
inline constexpr char kCheckpointMagic[8] = {'G', 'Q', 'C', 'K', 'P', 'T', '\0', '\1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace detail {
template <typename T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_raw(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("truncated checkpoint");
  return v;
}
}  // namespace detail

inline json dims_to_json(const ModelDims& d) {
  return {{"vocab", d.vocab}, {"pos_vocab", d.pos_vocab}, {"h_x", d.h_x}, {"h_p", d.h_p},
          {"h_s", d.h_s},     {"h_e", d.h_e},             {"h_r", d.h_r}};
}

inline void save_checkpoint(std::ostream& out, const Model& m) {
  json header;
  header["version"] = kCheckpointVersion;
  header["config"] = to_json(m.config);
  header["dims"] = dims_to_json(m.params.dims);
  header["token_vocab"] = m.tokens.words();
  header["pos_vocab"] = m.pos_tags.words();
  json tensors = json::array();
  m.params.for_each([&](const std::string& name, const Mat<double>& t) {
    tensors.push_back({{"name", name}, {"shape", {t.rows(), t.cols()}}});
  });
  header["tensors"] = tensors;
  const std::string h = header.dump();

  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::write_raw(out, kCheckpointVersion);
  detail::write_raw(out, static_cast<std::uint64_t>(h.size()));
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  m.params.for_each([&](const std::string&, const Mat<double>& t) {
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  });
  if (!out) throw DataError("failed writing checkpoint");
}

inline Model load_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw DataError("not a checkpoint file");
  const auto version = detail::read_raw<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto hlen = detail::read_raw<std::uint64_t>(in);
  std::string h(hlen, '\0');
  if (!in.read(h.data(), static_cast<std::streamsize>(hlen))) throw DataError("truncated checkpoint header");

  Model m;
  try {
    const json header = json::parse(h);
    m.config = merge_config(TrainConfig{}, header.at("config"));
    m.tokens = Vocabulary::from_words(header.at("token_vocab").get<std::vector<std::string>>());
    m.pos_tags = Vocabulary::from_words(header.at("pos_vocab").get<std::vector<std::string>>());
    const ModelDims dims = model_dims(m.config, m.tokens, m.pos_tags);
    if (dims_to_json(dims) != header.at("dims")) throw DataError("checkpoint dims disagree with config/vocabulary");
    m.params = zero_params<double>(dims);
    const json& tensors = header.at("tensors");
    std::size_t k = 0;
    m.params.for_each([&](const std::string& name, Mat<double>& t) {
      if (k >= tensors.size()) throw DataError("checkpoint is missing tensor '" + name + "'");
      const json& e = tensors.at(k++);
      if (e.at("name").get<std::string>() != name) throw DataError("checkpoint tensor order mismatch at '" + name + "'");
      if (e.at("shape").at(0).get<long>() != t.rows() || e.at("shape").at(1).get<long>() != t.cols())
        throw DataError("checkpoint tensor '" + name + "' has the wrong shape");
    });
    if (k != tensors.size()) throw DataError("checkpoint has unexpected extra tensors");
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }
  m.params.for_each([&](const std::string& name, Mat<double>& t) {
    if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double))))
      throw DataError("truncated checkpoint data in '" + name + "'");
  });
  std::string bad;
  if (!all_finite(m.params, &bad)) throw NumericError("checkpoint tensor '" + bad + "' has non-finite values");
  return m;
}

inline void save_checkpoint_file(const std::string& path, const Model& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  save_checkpoint(out, m);
}

inline Model load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  return load_checkpoint(in);
}

}  // namespace gridquad
