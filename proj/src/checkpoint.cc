// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ifasnet/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace ifasnet {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <class T>
void Put(std::string &out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string &bytes) : bytes_(bytes) {}

  template <class T>
  T Get() {
    Need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string GetString(size_t n) {
    Need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void Need(size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("checkpoint truncated");
  }
  const std::string &bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::string SerializeTensors(const NamedTensors &tensors) {
  std::string out = "IFSN";
  Put<uint32_t>(out, kCheckpointVersion);
  Put<uint32_t>(out, static_cast<uint32_t>(tensors.size()));
  for (const auto &[name, t] : tensors) {
    Put<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out += name;
    Put<uint32_t>(out, static_cast<uint32_t>(t.rank()));
    for (int64_t d : t.shape()) Put<uint64_t>(out, static_cast<uint64_t>(d));
    for (double v : t.values()) Put<double>(out, v);
  }
  return out;
}

NamedTensors DeserializeTensors(const std::string &bytes) {
  Reader r(bytes);
  if (r.GetString(4) != "IFSN") throw FormatError("not an IFSN checkpoint");
  const uint32_t version = r.Get<uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const uint32_t count = r.Get<uint32_t>();
  NamedTensors out;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = r.Get<uint32_t>();
    std::string name = r.GetString(name_len);
    const uint32_t rank = r.Get<uint32_t>();
    Shape shape(rank);
    for (auto &d : shape) d = static_cast<int64_t>(r.Get<uint64_t>());
    std::vector<double> values(NumElements(shape));
    for (double &v : values) v = r.Get<double>();
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint payload");
  return out;
}

void SaveCheckpoint(const std::string &path, const NamedTensors &tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  const std::string bytes = SerializeTensors(tensors);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing " + path);
}

NamedTensors LoadCheckpoint(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(is)),
                    std::istreambuf_iterator<char>());
  return DeserializeTensors(bytes);
}

}  // namespace ifasnet
