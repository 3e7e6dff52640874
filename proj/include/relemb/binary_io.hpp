#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "error.hpp"

namespace relemb {

using Fingerprint = std::array<std::uint8_t, 16>;

namespace io {

static_assert(std::endian::native == std::endian::little,
              "artifact files are written with native little-endian layout");

/// Buffered little-endian writer that lands on disk through a temp file + rename.
class BinaryWriter {
  public:
    explicit BinaryWriter(std::filesystem::path path) : m_path(std::move(path)) {}

    template <typename T>
    requires std::is_arithmetic_v<T>
    void put(T v) {
        auto const* p = reinterpret_cast<char const*>(&v);
        m_buf.insert(m_buf.end(), p, p + sizeof(T));
    }

    template <typename T>
    requires std::is_arithmetic_v<T>
    void put_array(std::span<T const> xs) {
        auto const* p = reinterpret_cast<char const*>(xs.data());
        m_buf.insert(m_buf.end(), p, p + xs.size_bytes());
    }

    void put_bytes(std::string_view s) { m_buf.insert(m_buf.end(), s.begin(), s.end()); }

    void put_fingerprint(Fingerprint const& fp) {
        m_buf.insert(m_buf.end(), fp.begin(), fp.end());
    }

    void commit();

  private:
    std::filesystem::path m_path;
    std::vector<char> m_buf;
};

class BinaryReader {
  public:
    explicit BinaryReader(std::filesystem::path const& path) : m_path(path.string()) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw Error("cannot open " + m_path);
        }
        m_buf.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    void expect_magic(std::string_view magic) {
        need(magic.size());
        if (std::string_view(m_buf.data() + m_pos, magic.size()) != magic) {
            throw Error(m_path + ": bad magic, expected " + std::string(magic));
        }
        m_pos += magic.size();
    }

    template <typename T>
    requires std::is_arithmetic_v<T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, m_buf.data() + m_pos, sizeof(T));
        m_pos += sizeof(T);
        return v;
    }

    template <typename T>
    requires std::is_arithmetic_v<T>
    std::vector<T> get_array(std::size_t n) {
        if (n > (m_buf.size() - m_pos) / sizeof(T)) {
            throw Error(m_path + ": truncated file");
        }
        std::vector<T> out(n);
        std::memcpy(out.data(), m_buf.data() + m_pos, n * sizeof(T));
        m_pos += n * sizeof(T);
        return out;
    }

    Fingerprint get_fingerprint() {
        need(16);
        Fingerprint fp{};
        std::memcpy(fp.data(), m_buf.data() + m_pos, 16);
        m_pos += 16;
        return fp;
    }

    void expect_end() const {
        if (m_pos != m_buf.size()) {
            throw Error(m_path + ": trailing bytes after payload");
        }
    }

  private:
    void need(std::size_t n) const {
        if (m_buf.size() - m_pos < n) {
            throw Error(m_path + ": truncated file");
        }
    }

    std::string m_path;
    std::vector<char> m_buf;
    std::size_t m_pos = 0;
};

/// Write `bytes` to `path` atomically: sibling temp file, then rename over the target.
inline void atomic_write(std::filesystem::path const& path, std::string_view bytes) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot write " + tmp.string());
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw Error("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

inline void BinaryWriter::commit() {
    atomic_write(m_path, std::string_view(m_buf.data(), m_buf.size()));
}

inline std::string read_text(std::filesystem::path const& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace io
}  // namespace relemb
