#include "discore/checkpoint.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace discore {

namespace {

constexpr char kMagic[8] = {'D', 'I', 'S', 'C', 'O', 'R', 'E', '\0'};

// Explicit little-endian byte packing keeps the file format independent of
// the host's layout instead of relying on memcpy of whole structs.
void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_i32(std::string& out, int32_t v) { put_u32(out, static_cast<uint32_t>(v)); }

void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  const std::string& path;

  void need(size_t n) const {
    if (pos + n > buf.size()) {
      throw CheckpointError(path + ": truncated checkpoint");
    }
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  int32_t i32() { return static_cast<int32_t>(u32()); }
  double f64() {
    const uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
};

}  // namespace

std::string checkpoint_name(int k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "net_%03d.ckpt", k);
  return buf;
}

void save_checkpoint(const ScoreNet& net, int K, int k, const std::string& path) {
  std::string out;
  out.append(kMagic, 8);
  put_u32(out, kCheckpointVersion);
  put_i32(out, net.S);
  put_i32(out, net.d);
  put_i32(out, K);
  put_i32(out, k);
  put_i32(out, net.depth);
  put_i32(out, net.width);
  put_i32(out, net.in_dim());
  put_i32(out, net.out_dim());
  put_f64(out, net.clip_bound);
  put_f64(out, net.query_time);
  put_u64(out, net.init_seed);
  put_u64(out, static_cast<uint64_t>(net.param_count()));
  for (int l = 0; l < net.depth; ++l) {
    for (double v : net.w[l]) put_f64(out, v);
    for (double v : net.b[l]) put_f64(out, v);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError(path + ": cannot open for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  f.flush();
  if (!f) throw CheckpointError(path + ": write failed");
}

ScoreNet load_checkpoint(const std::string& path, int* K_out, int* k_out) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError(path + ": cannot open");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{buf, 0, path};
  r.need(8);
  if (std::memcmp(buf.data(), kMagic, 8) != 0) {
    throw CheckpointError(path + ": bad magic (not a checkpoint file)");
  }
  r.pos = 8;
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError(path + ": unsupported format version " + std::to_string(version));
  }
  const int S = r.i32();
  const int d = r.i32();
  const int K = r.i32();
  const int k = r.i32();
  const int depth = r.i32();
  const int width = r.i32();
  const int in_dim = r.i32();
  const int out_dim = r.i32();
  const double clip = r.f64();
  const double query_time = r.f64();
  const uint64_t init_seed = r.u64();
  const uint64_t param_count = r.u64();

  if (S < 2 || d < 1 || depth < 1 || K < 0 || k < 0 || k >= std::max(K, 1)) {
    throw CheckpointError(path + ": header fields out of range");
  }
  ScoreNet net;
  net.S = S;
  net.d = d;
  net.width = width;
  net.depth = depth;
  net.clip_bound = clip;
  net.query_time = query_time;
  net.init_seed = init_seed;
  if (in_dim != net.in_dim() || out_dim != net.out_dim()) {
    throw CheckpointError(path + ": stored dimensions disagree with S and d");
  }
  if (depth > 1 && width < 1) throw CheckpointError(path + ": invalid hidden width");
  net.w.resize(depth);
  net.b.resize(depth);
  if (param_count != static_cast<uint64_t>(net.param_count())) {
    throw CheckpointError(path + ": parameter count disagrees with layer sizes");
  }
  for (int l = 0; l < depth; ++l) {
    net.w[l].resize(static_cast<size_t>(net.layer_out(l)) * net.layer_in(l));
    for (double& v : net.w[l]) v = r.f64();
    net.b[l].resize(net.layer_out(l));
    for (double& v : net.b[l]) v = r.f64();
  }
  if (r.pos != buf.size()) {
    throw CheckpointError(path + ": trailing bytes after parameter array");
  }
  if (K_out) *K_out = K;
  if (k_out) *k_out = k;
  return net;
}

}  // namespace discore
