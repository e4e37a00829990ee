// Minimal MATLAB level-5 reader: enough to pull the int16 "val" vector out of
// the files the 2017 AF challenge distributes.

#include <cstring>
#include <string>

#include "ecgtf/error.hpp"
#include "ecgtf/ingest.hpp"

namespace ecgtf::mat5 {

namespace {

constexpr std::size_t kHeaderSize = 128;

enum DataType : std::uint32_t {
  miINT8 = 1,
  miUINT8 = 2,
  miINT16 = 3,
  miUINT16 = 4,
  miINT32 = 5,
  miUINT32 = 6,
  miMATRIX = 14,
  miCOMPRESSED = 15,
};

enum ArrayClass : std::uint8_t {
  mxDOUBLE_CLASS = 6,
  mxINT16_CLASS = 10,
};

constexpr std::uint32_t kComplexFlag = 0x0800;

class Cursor {
 public:
  Cursor(std::span<const std::byte> data, bool swap) : data_(data), swap_(swap) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void seek(std::size_t pos) { pos_ = pos; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw FormatError(std::string("mat5: truncated ") + what, pos_);
  }

  std::uint32_t u32() {
    need(4, "field");
    std::uint32_t v;
    std::memcpy(&v, data_.data() + pos_, 4);
    pos_ += 4;
    return swap_ ? __builtin_bswap32(v) : v;
  }

  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }

  std::int16_t i16_at(std::size_t pos) const {
    std::uint16_t v;
    std::memcpy(&v, data_.data() + pos, 2);
    return static_cast<std::int16_t>(swap_ ? __builtin_bswap16(v) : v);
  }

  std::span<const std::byte> bytes(std::size_t pos, std::size_t n) const {
    return data_.subspan(pos, n);
  }

 private:
  std::span<const std::byte> data_;
  bool swap_;
  std::size_t pos_ = 0;
};

struct Tag {
  std::uint32_t type;
  std::uint32_t size;
  std::size_t data_offset;  // where payload starts
  std::size_t next;         // where the following element starts
  std::size_t tag_offset;
};

Tag read_tag(Cursor& c) {
  Tag t{};
  t.tag_offset = c.offset();
  const std::uint32_t first = c.u32();
  if ((first >> 16) != 0) {
    // Small data element: size and type packed into one word, payload in the next 4 bytes.
    t.type = first & 0xFFFF;
    t.size = first >> 16;
    if (t.size > 4) throw FormatError("mat5: small data element larger than 4 bytes", t.tag_offset);
    c.need(4, "small data element");
    t.data_offset = c.offset();
    t.next = t.data_offset + 4;
  } else {
    t.type = first;
    t.size = c.u32();
    t.data_offset = c.offset();
    const std::size_t padded = (static_cast<std::size_t>(t.size) + 7) & ~std::size_t{7};
    t.next = t.data_offset + padded;
  }
  return t;
}

std::size_t element_size(std::uint32_t type) {
  switch (type) {
    case miINT8:
    case miUINT8: return 1;
    case miINT16:
    case miUINT16: return 2;
    case miINT32:
    case miUINT32: return 4;
    default: return 0;
  }
}

}  // namespace

std::vector<std::int16_t> read_int16_vector(std::span<const std::byte> file, std::string_view name) {
  if (file.size() < kHeaderSize) throw FormatError("mat5: file shorter than the 128-byte header", file.size());

  const char e0 = static_cast<char>(file[126]);
  const char e1 = static_cast<char>(file[127]);
  bool swap;
  if (e0 == 'I' && e1 == 'M') {
    swap = false;
  } else if (e0 == 'M' && e1 == 'I') {
    swap = true;
  } else {
    throw FormatError("mat5: bad endian indicator, not a level-5 MAT-file", 126);
  }
  // Only the little-endian branch is exercised by real data; the swap path
  // mirrors it for files written on big-endian hosts.
  Cursor c(file, swap);

  std::vector<std::int16_t> result;
  bool found = false;
  c.seek(kHeaderSize);
  while (c.remaining() > 0) {
    if (c.remaining() < 8) throw FormatError("mat5: trailing bytes after last element", c.offset());
    const Tag top = read_tag(c);
    if (top.type == miCOMPRESSED) {
      throw FormatError("mat5: compressed elements are not supported", top.tag_offset);
    }
    if (top.type != miMATRIX) {
      throw FormatError("mat5: unexpected top-level element type " + std::to_string(top.type),
                        top.tag_offset);
    }
    if (top.next > file.size()) throw FormatError("mat5: matrix element overruns file", top.tag_offset);
    if (found) throw FormatError("mat5: more than one variable in file", top.tag_offset);

    // Array flags
    const Tag flags = read_tag(c);
    if (flags.type != miUINT32 || flags.size != 8) {
      throw FormatError("mat5: malformed array flags", flags.tag_offset);
    }
    const std::uint32_t flag_word = c.u32();
    c.u32();
    const auto cls = static_cast<std::uint8_t>(flag_word & 0xFF);
    if (flag_word & kComplexFlag) throw FormatError("mat5: complex arrays are not supported", flags.tag_offset);
    if (cls != mxINT16_CLASS && cls != mxDOUBLE_CLASS) {
      throw FormatError("mat5: unsupported array class " + std::to_string(cls), flags.tag_offset);
    }
    c.seek(flags.next);

    // Dimensions
    const Tag dims = read_tag(c);
    if (dims.type != miINT32 || dims.size % 4 != 0) {
      throw FormatError("mat5: malformed dimensions", dims.tag_offset);
    }
    std::vector<std::int64_t> shape;
    for (std::uint32_t i = 0; i < dims.size / 4; ++i) shape.push_back(c.i32());
    if (shape.size() != 2 || (shape[0] != 1 && shape[1] != 1) || shape[0] < 0 || shape[1] < 0) {
      throw FormatError("mat5: expected a single-lead vector", dims.tag_offset);
    }
    const auto count = static_cast<std::size_t>(shape[0] * shape[1]);
    c.seek(dims.next);

    // Name
    const Tag name_tag = read_tag(c);
    if (name_tag.type != miINT8) throw FormatError("mat5: malformed array name", name_tag.tag_offset);
    c.need(name_tag.size, "array name");
    const auto raw_name = c.bytes(name_tag.data_offset, name_tag.size);
    const std::string var(reinterpret_cast<const char*>(raw_name.data()), raw_name.size());
    if (var != name) {
      throw FormatError("mat5: variable is named '" + var + "', expected '" + std::string(name) + "'",
                        name_tag.tag_offset);
    }
    c.seek(name_tag.next);

    // Real part
    const Tag real = read_tag(c);
    if (real.type != miINT16) {
      throw FormatError("mat5: payload type " + std::to_string(real.type) + " is not miINT16",
                        real.tag_offset);
    }
    if (real.size != count * element_size(miINT16)) {
      throw FormatError("mat5: payload size disagrees with dimensions", real.tag_offset);
    }
    if (real.data_offset + real.size > file.size()) {
      throw FormatError("mat5: payload overruns file", real.tag_offset);
    }
    result.resize(count);
    for (std::size_t i = 0; i < count; ++i) result[i] = c.i16_at(real.data_offset + 2 * i);
    if (real.next > top.next) throw FormatError("mat5: payload overruns matrix element", real.tag_offset);
    found = true;
    c.seek(top.next);
  }
  if (!found) throw FormatError("mat5: no variable named '" + std::string(name) + "'", kHeaderSize);
  return result;
}

}  // namespace ecgtf::mat5
