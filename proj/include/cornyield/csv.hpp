#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cornyield::csv {

using Row = std::vector<std::string>;

/// RFC 4180 style: comma separated, optional double quotes, CRLF or LF.
[[nodiscard]] std::vector<Row> parse(std::string_view text);

[[nodiscard]] std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

[[nodiscard]] std::string escape(std::string_view field);
[[nodiscard]] std::string join(const Row& fields);

/// Shortest representation that round-trips to the same double.
[[nodiscard]] std::string format_double(double value);

/// Strict parse of a whole cell; returns false on trailing garbage.
[[nodiscard]] bool parse_double(std::string_view text, double& out);

/// Incremental CSV text builder.
class Writer {
public:
    explicit Writer(const Row& header) { add(header); }
    void add(const Row& fields) {
        text_ += join(fields);
        text_ += '\n';
    }
    [[nodiscard]] const std::string& str() const noexcept { return text_; }
    void save(const std::filesystem::path& path) const { write_file(path, text_); }

private:
    std::string text_;
};

}  // namespace cornyield::csv
