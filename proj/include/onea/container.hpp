#ifndef ONEA_CONTAINER_HPP
#define ONEA_CONTAINER_HPP

//
// `.onea` adapter container:
//
//   "ONEA" | u32 LE version (1) | u32 LE header length | UTF-8 JSON header
//   | row-major f32 LE payload for each layer, in layer order
//
// Header: {task_id, class_ids, class_count, sample_count, bottleneck,
//          layers: [{rows, cols}, ...]}
//

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <json.hpp>

#include "onea/adapter.hpp"
#include "onea/errors.hpp"

namespace onea::container {

inline constexpr char magic[4] = {'O', 'N', 'E', 'A'};
inline constexpr std::uint32_t format_version = 1;
inline constexpr std::size_t preamble_size = 12;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int k = 0; k < 4; ++k)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

inline std::uint32_t get_u32(const std::uint8_t* p)
{
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

} // namespace detail

inline std::vector<std::uint8_t> serialize(const AdapterModule& m)
{
    if (m.layers.empty())
        throw format_error("cannot serialize an adapter with no layers", 0);

    nlohmann::json layers = nlohmann::json::array();
    for (const auto& w : m.layers) {
        if (w.empty())
            throw format_error("cannot serialize an empty layer matrix", 0);
        if (!w.all_finite())
            throw numeric_error("cannot serialize non-finite adapter weights");
        layers.push_back({{"rows", w.rows()}, {"cols", w.cols()}});
    }
    const nlohmann::json header = {
        {"task_id", m.meta.task_id},
        {"class_ids", m.meta.class_ids},
        {"class_count", m.meta.class_count()},
        {"sample_count", m.meta.sample_count},
        {"bottleneck", m.bottleneck},
        {"layers", layers},
    };
    const std::string text = header.dump();

    std::vector<std::uint8_t> out(std::begin(magic), std::end(magic));
    detail::put_u32(out, format_version);
    detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& w : m.layers)
        for (double v : w.data())
            detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    return out;
}

inline AdapterModule deserialize(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < preamble_size)
        throw format_error("truncated preamble", bytes.size());
    if (std::memcmp(bytes.data(), magic, 4) != 0)
        throw format_error("bad magic, expected \"ONEA\"", 0);
    const std::uint32_t version = detail::get_u32(bytes.data() + 4);
    if (version != format_version)
        throw format_error("unsupported format version " + std::to_string(version), 4);
    const std::size_t header_len = detail::get_u32(bytes.data() + 8);
    if (bytes.size() - preamble_size < header_len)
        throw format_error("truncated header: declares " + std::to_string(header_len) + " bytes", bytes.size());

    const auto* hbegin = reinterpret_cast<const char*>(bytes.data() + preamble_size);
    nlohmann::json header;
    AdapterModule m;
    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    try {
        header = nlohmann::json::parse(hbegin, hbegin + header_len);
        m.meta.task_id = header.at("task_id").get<std::int64_t>();
        for (int c : header.at("class_ids"))
            m.meta.class_ids.insert(c);
        m.meta.sample_count = header.at("sample_count").get<std::uint64_t>();
        m.bottleneck = header.at("bottleneck").get<std::size_t>();
        if (header.at("class_count").get<std::size_t>() != m.meta.class_count())
            throw format_error("class_count does not match class_ids", preamble_size);
        for (const auto& l : header.at("layers")) {
            const auto r = l.at("rows").get<std::size_t>();
            const auto c = l.at("cols").get<std::size_t>();
            if (r == 0 || c == 0)
                throw format_error("layer with zero extent", preamble_size);
            shapes.emplace_back(r, c);
        }
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("malformed header: ") + e.what(), preamble_size);
    }
    if (shapes.empty())
        throw format_error("header declares no layers", preamble_size);

    std::size_t offset = preamble_size + header_len;
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        const auto [r, c] = shapes[l];
        const std::size_t need = r * c * 4;
        if (bytes.size() - offset < need)
            throw format_error("truncated payload for layer " + std::to_string(l) + " of " +
                                   std::to_string(shapes.size()),
                               bytes.size());
        Matrix w(r, c);
        for (std::size_t k = 0; k < r * c; ++k) {
            const float f = std::bit_cast<float>(detail::get_u32(bytes.data() + offset + 4 * k));
            if (!std::isfinite(f))
                throw format_error("non-finite weight", offset + 4 * k);
            w.data()[k] = f;
        }
        m.layers.push_back(std::move(w));
        offset += need;
    }
    if (offset != bytes.size())
        throw format_error("trailing bytes after payload", offset);
    return m;
}

inline void write_file(const std::filesystem::path& path, const AdapterModule& m)
{
    const auto bytes = serialize(m);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::ios_base::failure("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw std::ios_base::failure("write failed: " + path.string());
}

inline AdapterModule read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::ios_base::failure("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

} // namespace onea::container

#endif // ONEA_CONTAINER_HPP
