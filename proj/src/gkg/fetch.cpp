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

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "spreadcast/csv.hpp"
#include "spreadcast/error.hpp"
#include "spreadcast/gkg.hpp"

namespace spreadcast::gkg {
namespace {

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

UrlParts split_url(const std::string& url) {
  const std::size_t scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorKind::kParameter, "base URL needs a scheme: " + url);
  const std::size_t slash = url.find('/', scheme + 3);
  UrlParts parts;
  parts.origin = url.substr(0, slash);
  parts.prefix = slash == std::string::npos ? std::string() : url.substr(slash);
  while (!parts.prefix.empty() && parts.prefix.back() == '/') parts.prefix.pop_back();
  return parts;
}

bool archive_ok(const std::filesystem::path& path) {
  try {
    (void)read_gkg_archive(path);
    return true;
  } catch (const Error&) {
    return false;
  }
}

enum class SlotStatus { kCached, kDownloaded, kMissing, kCorrupt };

}  // namespace

std::vector<Instant> gkg_slots(Instant begin, Instant end) {
  using namespace std::chrono;
  std::vector<Instant> out;
  const auto step = duration_cast<seconds>(kSlotLength);
  Instant t = Instant{ceil<minutes>(begin).time_since_epoch()};
  const auto rem = t.time_since_epoch() % step;
  if (rem != seconds{0}) t += step - rem;
  for (; t < end; t += step) out.push_back(t);
  return out;
}

std::string gkg_slot_filename(Instant slot) { return format_gkg_timestamp(slot) + ".gkg.csv.zip"; }

FetchReport fetch_gkg_files(const std::string& base_url, Instant begin, Instant end,
                            const std::filesystem::path& dest_dir, const FetchOptions& options) {
  const std::vector<Instant> slots = gkg_slots(begin, end);
  if (slots.empty()) throw Error(ErrorKind::kParameter, "fetch range contains no 15-minute slot");
  std::filesystem::create_directories(dest_dir);
  const UrlParts url = split_url(base_url);

  std::vector<SlotStatus> status(slots.size(), SlotStatus::kMissing);
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    httplib::Client client(url.origin);
    client.set_connection_timeout(options.timeout);
    client.set_read_timeout(options.timeout);
    client.set_follow_location(true);
    for (std::size_t i = next++; i < slots.size(); i = next++) {
      const std::string name = gkg_slot_filename(slots[i]);
      const std::filesystem::path target = dest_dir / name;
      if (std::filesystem::exists(target) && archive_ok(target)) {
        status[i] = SlotStatus::kCached;
        continue;
      }
      auto backoff = options.initial_backoff;
      for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
        if (attempt > 0) {
          std::this_thread::sleep_for(backoff);
          backoff = std::min(backoff * 2, options.max_backoff);
        }
        auto res = client.Get(url.prefix + "/" + name);
        if (!res) continue;                // transport failure: retry
        if (res->status == 404) break;     // slot not published
        if (res->status >= 500) continue;  // server trouble: retry
        if (res->status != 200) break;
        const std::filesystem::path partial = target.string() + ".part";
        csv::write_file(partial, res->body);
        std::filesystem::rename(partial, target);
        if (archive_ok(target)) {
          status[i] = SlotStatus::kDownloaded;
        } else {
          std::filesystem::remove(target);
          status[i] = SlotStatus::kCorrupt;
        }
        break;
      }
    }
  };

  const int n_threads =
      std::max(1, std::min<int>(options.concurrency, static_cast<int>(slots.size())));
  std::vector<std::thread> threads;
  for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  FetchReport report;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const std::filesystem::path target = dest_dir / gkg_slot_filename(slots[i]);
    switch (status[i]) {
      case SlotStatus::kDownloaded:
        ++report.downloaded;
        [[fallthrough]];
      case SlotStatus::kCached:
        report.paths.push_back(target);
        break;
      case SlotStatus::kMissing:
        report.missing.push_back(slots[i]);
        break;
      case SlotStatus::kCorrupt:
        report.corrupt.push_back(target);
        break;
    }
  }
  return report;
}

}  // namespace spreadcast::gkg
