#include "srpl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace srpl {

namespace {

template <typename U>
void put_le(std::string& out, U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename U>
    U get() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += sizeof(U);
        return v;
    }

    std::string_view take(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw std::runtime_error("checkpoint is truncated");
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    std::string out(kCheckpointMagic);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.networks.size()));
    for (const auto& net : ckpt.networks) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.layer_sizes().size()));
        for (int s : net.layer_sizes()) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s));
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.head()));
        for (float p : net.params()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(p));
    }
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(ckpt.metadata.size()));
    out += ckpt.metadata;
    return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
    Reader r(bytes);
    if (r.take(kCheckpointMagic.size()) != kCheckpointMagic) throw std::runtime_error("bad checkpoint magic");
    Checkpoint ckpt;
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t n = 0; n < count; ++n) {
        const auto size_count = r.get<std::uint32_t>();
        if (size_count < 2 || size_count > 64) throw std::runtime_error("bad checkpoint layer count");
        std::vector<int> sizes;
        for (std::uint32_t i = 0; i < size_count; ++i) sizes.push_back(static_cast<int>(r.get<std::uint32_t>()));
        const auto head = r.get<std::uint32_t>();
        if (head > 2) throw std::runtime_error("bad checkpoint head kind");
        DenseNet<float> net(sizes, static_cast<Head>(head));
        for (auto& p : net.params()) p = std::bit_cast<float>(r.get<std::uint32_t>());
        ckpt.networks.push_back(std::move(net));
    }
    const auto meta_len = r.get<std::uint64_t>();
    ckpt.metadata = std::string(r.take(static_cast<std::size_t>(meta_len)));
    if (!r.at_end()) throw std::runtime_error("trailing bytes after checkpoint metadata");
    return ckpt;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) { write_file(path, serialize_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path)); }

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
        v >>= 4;
    }
    return s;
}

}  // namespace srpl
