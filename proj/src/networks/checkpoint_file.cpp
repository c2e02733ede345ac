#include "crsr/checkpoint.hpp"

#include "crsr/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace crsr {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'C', 'R', 'S', 'R', 'C', 'K', 'P', 'T'};

uint64_t fnv1a(const std::vector<uint8_t>& bytes, size_t count) {
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < count; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

class Writer {
 public:
  void raw(const void* data, size_t n) {
    const auto* p = static_cast<const uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void str32(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::vector<uint8_t>& bytes, size_t end, std::string source)
      : bytes_(bytes), end_(end), source_(std::move(source)) {}

  void need(size_t n) const {
    if (pos_ + n > end_) throw IoError(source_ + ": truncated checkpoint");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::string str(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  size_t pos() const { return pos_; }

 private:
  const std::vector<uint8_t>& bytes_;
  size_t end_;
  std::string source_;
  size_t pos_ = 0;
};

}  // namespace

const CheckpointSection* CheckpointFile::find(std::string_view name) const {
  for (const auto& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

void write_checkpoint_file(const fs::path& path, const CheckpointFile& file) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(file.version);
  w.u64(file.fingerprint);
  w.u64(file.metadata.size());
  w.raw(file.metadata.data(), file.metadata.size());
  w.u32(static_cast<uint32_t>(file.sections.size()));
  for (const auto& section : file.sections) {
    w.str32(section.name);
    w.u32(static_cast<uint32_t>(section.arrays.size()));
    for (const auto& [name, tensor] : section.arrays) {
      w.str32(name);
      w.u32(static_cast<uint32_t>(tensor.dim()));
      for (int64_t d : tensor.sizes()) w.u64(static_cast<uint64_t>(d));
      auto values = tensor.detach().to(torch::kCPU, torch::kFloat32).contiguous();
      const float* data = values.data_ptr<float>();
      for (int64_t i = 0; i < values.numel(); ++i) w.u32(std::bit_cast<uint32_t>(data[i]));
    }
  }
  const uint64_t checksum = fnv1a(w.bytes(), w.bytes().size());
  w.u64(checksum);

  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out.write(reinterpret_cast<const char*>(w.bytes().data()),
              static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw IoError(path.string() + ": write failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError(path.string() + ": " + ec.message());
}

CheckpointFile read_checkpoint_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open checkpoint");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) + 4 + 8 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoError(path.string() + ": not a checkpoint file");
  }

  Reader header(bytes, bytes.size(), path.string());
  header.str(sizeof(kMagic));
  CheckpointFile file;
  file.version = header.u32();
  if (file.version != kCheckpointVersion) {
    throw StateError(path.string() + ": checkpoint version " + std::to_string(file.version) +
                     ", expected " + std::to_string(kCheckpointVersion));
  }
  if (bytes.size() < 8 + header.pos()) throw IoError(path.string() + ": truncated checkpoint");
  const size_t body_end = bytes.size() - 8;
  Reader tail(bytes, bytes.size(), path.string());
  tail.str(body_end);
  if (tail.u64() != fnv1a(bytes, body_end)) {
    throw IoError(path.string() + ": checksum mismatch (corrupt checkpoint)");
  }

  Reader r(bytes, body_end, path.string());
  r.str(sizeof(kMagic));
  r.u32();
  file.fingerprint = r.u64();
  file.metadata = r.str(r.u64());
  const uint32_t section_count = r.u32();
  for (uint32_t s = 0; s < section_count; ++s) {
    CheckpointSection section;
    section.name = r.str(r.u32());
    const uint32_t array_count = r.u32();
    for (uint32_t a = 0; a < array_count; ++a) {
      std::string name = r.str(r.u32());
      const uint32_t rank = r.u32();
      std::vector<int64_t> dims(rank);
      int64_t numel = 1;
      for (auto& d : dims) {
        d = static_cast<int64_t>(r.u64());
        if (d < 0 || d > (int64_t{1} << 32)) throw IoError(path.string() + ": bad array shape");
        numel *= d;
      }
      r.need(static_cast<size_t>(numel) * 4);
      auto tensor = torch::empty(dims, torch::kFloat32);
      float* data = tensor.data_ptr<float>();
      for (int64_t i = 0; i < numel; ++i) data[i] = std::bit_cast<float>(r.u32());
      section.arrays.emplace_back(std::move(name), std::move(tensor));
    }
    file.sections.push_back(std::move(section));
  }
  if (r.pos() != body_end) throw IoError(path.string() + ": trailing bytes in checkpoint");
  return file;
}

}  // namespace crsr
