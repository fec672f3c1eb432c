#include "grouprl/checkpoint.hpp"

#include "grouprl/errors.hpp"
#include "grouprl/hash.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace grouprl {

namespace {

constexpr char kMagic[8] = {'G', 'R', 'P', 'R', 'L', 'C', 'K', 'P'};

void put_u32(std::vector<unsigned char>& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::vector<unsigned char>& buf, uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void put_i32(std::vector<unsigned char>& buf, int32_t v) {
  put_u32(buf, static_cast<uint32_t>(v));
}

void put_f64(std::vector<unsigned char>& buf, double v) {
  put_u64(buf, std::bit_cast<uint64_t>(v));
}

class Reader {
 public:
  Reader(const unsigned char* data, size_t size, std::string path)
      : data_(data), size_(size), path_(std::move(path)) {}

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  int32_t i32() { return static_cast<int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  uint8_t u8() {
    need(1);
    return data_[pos_++];
  }

  std::string str(size_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), len);
    pos_ += len;
    return s;
  }

  size_t remaining() const { return size_ - pos_; }

 private:
  void need(size_t n) {
    if (pos_ + n > size_) throw IntegrityError(path_ + ": checkpoint truncated");
  }

  const unsigned char* data_;
  size_t size_;
  size_t pos_ = 0;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::string& path, const PolicyModel& model,
                     const PolicyParams& params) {
  const int v_count = model.fmap.vocab_size;
  const int dim = model.fmap.dim();
  if (params.weights.rows != v_count || params.weights.cols != dim)
    throw ContractViolation("save_checkpoint: params shape does not match model");

  std::vector<unsigned char> buf;
  buf.insert(buf.end(), kMagic, kMagic + sizeof(kMagic));
  put_u32(buf, kCheckpointVersion);
  put_u32(buf, static_cast<uint32_t>(v_count));
  put_u32(buf, static_cast<uint32_t>(dim));
  put_u32(buf, static_cast<uint32_t>(model.fmap.position_buckets));
  put_u32(buf, static_cast<uint32_t>(model.fmap.l_hard));
  for (const Token& t : model.vocab.tokens()) {
    buf.push_back(static_cast<unsigned char>(t.role));
    put_i32(buf, t.arg);
    put_u32(buf, static_cast<uint32_t>(t.name.size()));
    buf.insert(buf.end(), t.name.begin(), t.name.end());
  }
  for (double w : params.weights.data) put_f64(buf, w);
  put_u64(buf, fnv1a64(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "' for reading");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());

  if (buf.size() < sizeof(kMagic) + 8) throw IntegrityError(path + ": checkpoint truncated");

  const uint64_t stored = [&] {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(buf[buf.size() - 8 + static_cast<size_t>(i)]) << (8 * i);
    return v;
  }();
  if (fnv1a64(buf.data(), buf.size() - 8) != stored)
    throw IntegrityError(path + ": checksum mismatch, file is corrupt");

  Reader r(buf.data(), buf.size() - 8, path);
  if (r.str(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    throw IntegrityError(path + ": not a checkpoint file");
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw VersionError(path + ": unsupported checkpoint version " + std::to_string(version) +
                       " (expected " + std::to_string(kCheckpointVersion) + ")");

  const uint32_t v_count = r.u32();
  const uint32_t dim = r.u32();
  const uint32_t buckets = r.u32();
  const uint32_t l_hard = r.u32();

  std::vector<Token> tokens;
  tokens.reserve(v_count);
  for (uint32_t i = 0; i < v_count; ++i) {
    Token t;
    t.role = static_cast<TokenRole>(r.u8());
    t.arg = r.i32();
    uint32_t name_len = r.u32();
    t.name = r.str(name_len);
    tokens.push_back(std::move(t));
  }

  PolicyModel model(Vocabulary(std::move(tokens)), static_cast<int>(buckets),
                    static_cast<int>(l_hard));
  if (model.fmap.dim() != static_cast<int>(dim))
    throw IntegrityError(path + ": stored feature dimension " + std::to_string(dim) +
                         " does not match architecture");

  PolicyParams params = PolicyParams::zeros(model.fmap);
  for (double& w : params.weights.data) w = r.f64();
  if (r.remaining() != 0) throw IntegrityError(path + ": trailing bytes in checkpoint");

  return LoadedCheckpoint{std::move(model), std::move(params)};
}

uint64_t params_fingerprint(const PolicyParams& params) {
  return fnv1a64(params.weights.data.data(), params.weights.data.size() * sizeof(double));
}

}  // namespace grouprl
