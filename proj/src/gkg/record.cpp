// Copyright 2026 The Spreadcast Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <charconv>
#include <cmath>
#include <cstdint>

#include "spreadcast/csv.hpp"
#include "spreadcast/error.hpp"
#include "spreadcast/gkg.hpp"

namespace spreadcast::gkg {
namespace {

std::vector<std::string> split_list(std::string_view field, char sep) {
  std::vector<std::string> out;
  for (auto item : csv::split(field, sep)) {
    if (!item.empty()) out.emplace_back(item);
  }
  return out;
}

void parse_gcam(std::string_view field, GkgRecord& rec) {
  if (field.empty()) return;
  bool saw_wc = false;
  for (auto pair : csv::split(field, ',')) {
    if (pair.empty()) continue;
    const std::size_t colon = pair.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == pair.size()) {
      rec.warnings.push_back("malformed GCAM pair '" + std::string(pair) + "'");
      continue;
    }
    const std::string_view code = pair.substr(0, colon);
    const std::string_view text = pair.substr(colon + 1);
    if (code == "wc") {
      std::int64_t wc = 0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), wc);
      if (ec != std::errc() || ptr != text.data() + text.size() || wc < 0) {
        rec.warnings.push_back("bad word count '" + std::string(text) + "'");
        continue;
      }
      rec.word_count = wc;
      saw_wc = true;
      continue;
    }
    if (code.front() == 'c') {
      std::int64_t count = 0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), count);
      if (ec != std::errc() || ptr != text.data() + text.size() || count < 0) {
        rec.warnings.push_back("GCAM count '" + std::string(pair) + "' is not a non-negative integer");
        continue;
      }
      rec.gcam_counts[std::string(code)] = static_cast<double>(count);
      continue;
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
      rec.warnings.push_back("GCAM score '" + std::string(pair) + "' is not a finite number");
      continue;
    }
    rec.gcam_counts[std::string(code)] = value;
  }
  if (!saw_wc) rec.warnings.push_back("GCAM field has no wc entry");
}

}  // namespace

bool GkgRecord::same_fields(const GkgRecord& o) const {
  return record_id == o.record_id && publish_instant == o.publish_instant && outlet == o.outlet &&
         document == o.document && wb_themes == o.wb_themes && gdelt_themes == o.gdelt_themes &&
         theme_mentions == o.theme_mentions && locations == o.locations && persons == o.persons &&
         organizations == o.organizations && gcam_counts == o.gcam_counts &&
         word_count == o.word_count;
}

GkgRecord parse_gkg_record(std::string_view raw_line) {
  while (!raw_line.empty() && (raw_line.back() == '\n' || raw_line.back() == '\r')) {
    raw_line.remove_suffix(1);
  }
  const auto cols = csv::split(raw_line, '\t');
  if (cols.size() != kGkgColumnCount) {
    throw ParseError(cols.size(), "expected " + std::to_string(kGkgColumnCount) +
                                      " tab-separated columns, found " +
                                      std::to_string(cols.size()));
  }
  GkgRecord rec;
  rec.record_id = std::string(cols[kRecordId]);
  try {
    rec.publish_instant = parse_gkg_timestamp(cols[kDate]);
  } catch (const Error& e) {
    throw ParseError(kDate, std::string("column 1 (V2.1DATE): ") + e.what());
  }
  rec.outlet = std::string(cols[kSourceCommonName]);
  rec.document = std::string(cols[kDocumentIdentifier]);

  for (auto& theme : split_list(cols[kV1Themes], ';')) {
    if (theme.rfind("WB_", 0) == 0) {
      rec.wb_themes.push_back(std::move(theme));
    } else {
      rec.gdelt_themes.push_back(std::move(theme));
    }
  }
  for (auto entry : csv::split(cols[kV2Themes], ';')) {
    if (entry.empty()) continue;
    ThemeMention m;
    const std::size_t comma = entry.rfind(',');
    if (comma == std::string_view::npos) {
      m.code = std::string(entry);
    } else {
      m.code = std::string(entry.substr(0, comma));
      const auto off = entry.substr(comma + 1);
      auto [ptr, ec] = std::from_chars(off.data(), off.data() + off.size(), m.offset);
      if (ec != std::errc() || ptr != off.data() + off.size()) {
        rec.warnings.push_back("bad theme offset in '" + std::string(entry) + "'");
        m.offset = -1;
      }
    }
    rec.theme_mentions.push_back(std::move(m));
  }
  for (auto loc : csv::split(cols[kV1Locations], ';')) {
    if (loc.empty()) continue;
    const auto parts = csv::split(loc, '#');
    if (parts.size() < 3 || parts[2].empty()) {
      rec.warnings.push_back("location without country code '" + std::string(loc) + "'");
      continue;
    }
    rec.locations.emplace_back(parts[2]);
  }
  rec.persons = split_list(cols[kV1Persons], ';');
  rec.organizations = split_list(cols[kV1Organizations], ';');
  parse_gcam(cols[kV2Gcam], rec);
  return rec;
}

std::string serialize_gkg_record(const GkgRecord& rec) {
  std::vector<std::string> cols(kGkgColumnCount);
  cols[kRecordId] = rec.record_id;
  cols[kDate] = format_gkg_timestamp(rec.publish_instant);
  cols[2] = "1";
  cols[kSourceCommonName] = rec.outlet;
  cols[kDocumentIdentifier] = rec.document;
  for (const auto& t : rec.wb_themes) cols[kV1Themes] += t + ";";
  for (const auto& t : rec.gdelt_themes) cols[kV1Themes] += t + ";";
  for (const auto& m : rec.theme_mentions) {
    cols[kV2Themes] += m.code;
    if (m.offset >= 0) cols[kV2Themes] += "," + std::to_string(m.offset);
    cols[kV2Themes] += ";";
  }
  for (const auto& cc : rec.locations) cols[kV1Locations] += "1##" + cc + "####;";
  for (const auto& p : rec.persons) cols[kV1Persons] += p + ";";
  for (const auto& o : rec.organizations) cols[kV1Organizations] += o + ";";
  cols[kV2Gcam] = "wc:" + std::to_string(rec.word_count);
  for (const auto& [code, value] : rec.gcam_counts) {
    cols[kV2Gcam] += "," + code + ":" + csv::format_double(value);
  }
  std::string line;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) line.push_back('\t');
    line += cols[i];
  }
  return line;
}

ParseOutcome parse_gkg_text(std::string_view text) {
  ParseOutcome out;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.empty() || line == "\r") continue;
    try {
      out.records.push_back(parse_gkg_record(line));
    } catch (const ParseError& e) {
      out.errors.push_back("line " + std::to_string(line_no) + " (column " +
                           std::to_string(e.column()) + "): " + e.what());
    }
  }
  return out;
}

}  // namespace spreadcast::gkg
