#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dymesh/rng.hpp"
#include "dymesh/tensor.hpp"

namespace dymesh {

inline constexpr std::size_t kMaxTextTokens = 77;

struct TextEmbedding {
    Tensor tokens;  // S x d_text, S >= 1
    std::string prompt;
};

struct MissingEmbeddingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Embedding archive, little-endian:
///   magic "DYTE" | u16 version | u32 count
///   per entry: u64 prompt hash | u32 S | u32 d | f32 data (S*d)
/// Maps prompt hash -> precomputed token matrix; produced by the
/// embed-import CLI from externally computed features.
class EmbeddingArchive {
  public:
    static constexpr char kMagic[4] = {'D', 'Y', 'T', 'E'};
    static constexpr std::uint16_t kVersion = 1;

    void put(const std::string& prompt, Tensor matrix) {
        entries_[Rng::hash_str(prompt)] = std::move(matrix);
    }

    const Tensor* find(const std::string& prompt) const {
        auto it = entries_.find(Rng::hash_str(prompt));
        return it == entries_.end() ? nullptr : &it->second;
    }

    std::size_t size() const { return entries_.size(); }

    void save(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("embedding archive: cannot write " + path);
        os.write(kMagic, 4);
        write(os, kVersion);
        write(os, std::uint32_t(entries_.size()));
        for (const auto& [hash, m] : entries_) {
            write(os, hash);
            write(os, std::uint32_t(m.rows()));
            write(os, std::uint32_t(m.cols()));
            os.write(reinterpret_cast<const char*>(m.data.data()),
                     std::streamsize(m.data.size() * sizeof(float)));
        }
    }

    static EmbeddingArchive load(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw std::runtime_error("embedding archive: cannot open " + path);
        char magic[4];
        is.read(magic, 4);
        if (!is || std::memcmp(magic, kMagic, 4) != 0)
            throw std::runtime_error("embedding archive: bad magic");
        std::uint16_t version;
        read(is, version);
        if (version != kVersion) throw std::runtime_error("embedding archive: bad version");
        std::uint32_t count;
        read(is, count);
        EmbeddingArchive out;
        for (std::uint32_t i = 0; i < count; ++i) {
            std::uint64_t hash;
            std::uint32_t s, d;
            read(is, hash);
            read(is, s);
            read(is, d);
            Tensor m({s, d});
            is.read(reinterpret_cast<char*>(m.data.data()),
                    std::streamsize(m.data.size() * sizeof(float)));
            if (!is) throw std::runtime_error("embedding archive: truncated");
            out.entries_[hash] = std::move(m);
        }
        return out;
    }

  private:
    template <class V>
    static void write(std::ostream& os, V v) {
        os.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    template <class V>
    static void read(std::istream& is, V& v) {
        is.read(reinterpret_cast<char*>(&v), sizeof(v));
        if (!is) throw std::runtime_error("embedding archive: truncated");
    }

    std::unordered_map<std::uint64_t, Tensor> entries_;
};

/// Pluggable stand-in for the frozen pre-trained text encoder. The stub mode
/// derives unit-norm per-token vectors from a seeded hash of whitespace
/// tokens; file-backed mode serves precomputed matrices and fails loudly on
/// a miss. Thread-safe and read-only after construction.
class TextEmbedder {
  public:
    explicit TextEmbedder(std::size_t d_text = 768) : d_text_(d_text) {}
    TextEmbedder(EmbeddingArchive archive, std::size_t d_text = 768)
        : d_text_(d_text), archive_(std::move(archive)), file_backed_(true) {}

    std::size_t dim() const { return d_text_; }

    TextEmbedding embed(const std::string& prompt) const {
        if (file_backed_) {
            const Tensor* m = archive_.find(prompt);
            if (!m)
                throw MissingEmbeddingError("no embedding stored for prompt: \"" + prompt + "\"");
            TextEmbedding out{*m, prompt};
            truncate(out.tokens);
            return out;
        }
        return stub(prompt);
    }

    /// Deterministic hash-derived embedding. The empty prompt yields a single
    /// token and serves as the unconditional branch for CFG.
    TextEmbedding stub(const std::string& prompt) const {
        std::vector<std::string> words;
        std::istringstream iss(prompt);
        std::string w;
        while (iss >> w && words.size() < kMaxTextTokens) words.push_back(w);
        if (words.empty()) words.push_back("");  // unconditional token

        Tensor m({words.size(), d_text_});
        for (std::size_t i = 0; i < words.size(); ++i) {
            Rng rng(Rng::hash_str(words[i]) ^ (0x9e3779b97f4a7c15ull * (i + 1)));
            double norm2 = 0;
            for (std::size_t j = 0; j < d_text_; ++j) {
                const double v = rng.normal();
                m.data[i * d_text_ + j] = float(v);
                norm2 += v * v;
            }
            const float inv = float(1.0 / std::sqrt(norm2));
            for (std::size_t j = 0; j < d_text_; ++j) m.data[i * d_text_ + j] *= inv;
        }
        return {std::move(m), prompt};
    }

  private:
    static void truncate(Tensor& m) {
        if (m.rows() > kMaxTextTokens) {
            m.data.resize(kMaxTextTokens * m.cols());
            m.shape[0] = kMaxTextTokens;
        }
    }

    std::size_t d_text_;
    EmbeddingArchive archive_;
    bool file_backed_ = false;
};

}  // namespace dymesh
