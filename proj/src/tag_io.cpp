#include <fmt/format.h>

#include <array>
#include <istream>
#include <ostream>
#include <string>

#include "pnr/error.hpp"
#include "pnr/tagstream.hpp"
#include "text.hpp"

namespace pnr {

void write_tag_csv_header(std::ostream& out) { out << "channel,time_ps\n"; }

void write_tag_csv(std::ostream& out, const TagRecord& tag) {
  out << channel_name(tag.channel) << ',' << tag.time_ps << '\n';
}

void write_tag_binary(std::ostream& out, const TagRecord& tag) {
  std::array<char, 9> record{};
  record[0] = static_cast<char>(tag.channel);
  for (int i = 0; i < 8; ++i) record[static_cast<std::size_t>(i) + 1] = static_cast<char>((tag.time_ps >> (8 * i)) & 0xFFU);
  out.write(record.data(), record.size());
}

void read_tags_csv(std::istream& in, const TagSink& sink) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = detail::split_csv(t);
    if (fields.size() != 2) throw FormatError(fmt::format("tag CSV line {}: expected 'channel,time_ps'", line_no));
    if (fields[0] == "channel") continue;
    try {
      sink(TagRecord{parse_channel(fields[0]), detail::parse_u64(fields[1])});
    } catch (const FormatError& e) {
      throw FormatError(fmt::format("tag CSV line {}: {}", line_no, e.what()));
    }
  }
}

void read_tags_binary(std::istream& in, const TagSink& sink) {
  std::array<unsigned char, 9> record{};
  while (true) {
    in.read(reinterpret_cast<char*>(record.data()), record.size());
    const auto got = in.gcount();
    if (got == 0) break;
    if (got != static_cast<std::streamsize>(record.size())) throw FormatError("truncated binary tag record");
    if (record[0] > 3) throw FormatError(fmt::format("unknown channel code {}", record[0]));
    std::uint64_t time = 0;
    for (int i = 7; i >= 0; --i) time = (time << 8) | record[static_cast<std::size_t>(i) + 1];
    sink(TagRecord{static_cast<Channel>(record[0]), time});
  }
}

void write_labels_csv(std::ostream& out, std::span<const PulseLabel> labels) {
  out << "pulse,lit_ports,signal1,signal2\n";
  for (const auto& l : labels) out << fmt::format("{},{},{},{}\n", l.pulse, l.lit_ports, int{l.signal1}, int{l.signal2});
}

}  // namespace pnr
