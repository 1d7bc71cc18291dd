#include "recode/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "recode/rng.hpp"

namespace recode {

namespace {

constexpr double kSecondsPerDay = 86400.0;

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::int64_t parse_timestamp(std::string_view s, std::size_t line_no) {
    std::int64_t v = 0;
    const auto* begin = s.data();
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end) {
        throw std::runtime_error("ingest_tsv: line " + std::to_string(line_no) +
                                 ": unparseable timestamp '" + std::string(s) + "'");
    }
    if (v < 0) {
        throw std::runtime_error("ingest_tsv: line " + std::to_string(line_no) +
                                 ": negative timestamp");
    }
    return v;
}

struct TripleHash {
    std::size_t operator()(const std::tuple<std::int32_t, std::int32_t, std::int64_t>& t) const {
        auto [u, i, s] = t;
        std::uint64_t h = splitmix64(static_cast<std::uint64_t>(u));
        h = splitmix64(h ^ static_cast<std::uint64_t>(i));
        h = splitmix64(h ^ static_cast<std::uint64_t>(s));
        return static_cast<std::size_t>(h);
    }
};

}  // namespace

IngestResult ingest_tsv(const std::filesystem::path& path, const ColumnSpec& columns) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("ingest_tsv: cannot open '" + path.string() + "'");

    IngestResult out;
    std::unordered_map<std::string, std::int32_t> user_index, item_index;
    std::unordered_set<std::tuple<std::int32_t, std::int32_t, std::int64_t>, TripleHash> seen;

    const int max_col = std::max({columns.user_col, columns.item_col, columns.time_col});
    std::string line;
    std::size_t line_no = 0;
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 && columns.has_header) continue;
        if (line.empty()) continue;
        const auto fields = split_tabs(line);
        if (static_cast<int>(fields.size()) <= max_col) {
            throw std::runtime_error("ingest_tsv: line " + std::to_string(line_no) +
                                     ": expected at least " + std::to_string(max_col + 1) +
                                     " tab-separated fields, got " +
                                     std::to_string(fields.size()));
        }
        const std::string user_raw(fields[static_cast<std::size_t>(columns.user_col)]);
        const std::string item_raw(fields[static_cast<std::size_t>(columns.item_col)]);
        if (user_raw.empty() || item_raw.empty()) {
            throw std::runtime_error("ingest_tsv: line " + std::to_string(line_no) +
                                     ": empty user or item field");
        }
        Interaction it;
        it.timestamp =
            parse_timestamp(fields[static_cast<std::size_t>(columns.time_col)], line_no);

        auto [uit, unew] = user_index.try_emplace(
            user_raw, static_cast<std::int32_t>(out.user_ids.size()));
        if (unew) out.user_ids.push_back(user_raw);
        it.user = uit->second;

        auto [iit, inew] = item_index.try_emplace(
            item_raw, static_cast<std::int32_t>(out.item_ids.size()));
        if (inew) out.item_ids.push_back(item_raw);
        it.item = iit->second;

        if (!seen.emplace(it.user, it.item, it.timestamp).second) ++out.duplicate_events;
        out.log.interactions.push_back(it);
        ++rows;
    }
    if (rows == 0) {
        throw std::runtime_error("ingest_tsv: '" + path.string() + "' contains no data rows");
    }
    out.log.num_users = static_cast<std::int32_t>(out.user_ids.size());
    out.log.num_items = static_cast<std::int32_t>(out.item_ids.size());
    return out;
}

void write_tsv(const std::filesystem::path& path, const InteractionLog& log) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_tsv: cannot write '" + path.string() + "'");
    for (const Interaction& it : log.interactions) {
        os << it.user << '\t' << it.item << '\t' << it.timestamp << '\n';
    }
    if (!os) throw std::runtime_error("write_tsv: write failed for '" + path.string() + "'");
}

std::vector<UserHistory> build_histories(const std::vector<Interaction>& interactions,
                                         std::int32_t num_users) {
    std::vector<UserHistory> out(static_cast<std::size_t>(num_users));
    for (std::int32_t u = 0; u < num_users; ++u) out[static_cast<std::size_t>(u)].user = u;
    for (const Interaction& it : interactions) {
        if (it.user < 0 || it.user >= num_users) {
            throw std::out_of_range("build_histories: user id " + std::to_string(it.user) +
                                    " outside [0, " + std::to_string(num_users) + ")");
        }
        out[static_cast<std::size_t>(it.user)].events.push_back({it.item, it.timestamp});
    }
    for (UserHistory& h : out) {
        std::stable_sort(h.events.begin(), h.events.end(),
                         [](const Event& a, const Event& b) { return a.time < b.time; });
    }
    return out;
}

std::vector<UserHistory> build_histories(const InteractionLog& log) {
    return build_histories(log.interactions, log.num_users);
}

std::size_t SplitDataset::num_eval_users() const {
    std::size_t n = 0;
    for (const auto& t : test_position) {
        if (t.has_value()) ++n;
    }
    return n;
}

SplitDataset leave_one_out(std::vector<UserHistory> histories) {
    SplitDataset split;
    split.histories = std::move(histories);
    const std::size_t n = split.histories.size();
    split.train_positions.resize(n);
    split.val_position.resize(n);
    split.test_position.resize(n);
    for (std::size_t u = 0; u < n; ++u) {
        const std::size_t events = split.histories[u].events.size();
        auto& train = split.train_positions[u];
        if (events >= 3) {
            train.resize(events - 2);
            for (std::size_t p = 0; p + 2 < events; ++p) train[p] = static_cast<std::uint32_t>(p);
            split.val_position[u] = static_cast<std::uint32_t>(events - 2);
            split.test_position[u] = static_cast<std::uint32_t>(events - 1);
        } else {
            train.resize(events);
            for (std::size_t p = 0; p < events; ++p) train[p] = static_cast<std::uint32_t>(p);
        }
    }
    return split;
}

void GapProcess::validate() const {
    if (!(rate_per_day > 0.0)) throw std::invalid_argument("GapProcess: rate must be positive");
    if (!(sigma_days > 0.0)) throw std::invalid_argument("GapProcess: sigma must be positive");
    if (weight < 0.0 || weight > 1.0) {
        throw std::invalid_argument("GapProcess: mixture weight must be in [0, 1]");
    }
}

void SyntheticConfig::validate() const {
    if (num_users < 1 || num_items < 1 || interactions_per_user < 1) {
        throw std::invalid_argument("SyntheticConfig: counts must be positive");
    }
    if (repeat_prob < 0.0 || repeat_prob > 1.0) {
        throw std::invalid_argument("SyntheticConfig: repeat_prob must be in [0, 1]");
    }
    if (!(popularity_exponent >= 0.0)) {
        throw std::invalid_argument("SyntheticConfig: popularity_exponent must be >= 0");
    }
    gap.validate();
}

namespace {

double draw_gap_days(const GapProcess& gap, Rng& rng) {
    switch (gap.kind) {
        case GapKind::exponential:
            return rng.exponential(gap.rate_per_day);
        case GapKind::gaussian:
            return rng.normal(gap.mu_days, gap.sigma_days);
        case GapKind::mixture:
            if (rng.uniform() < gap.weight) return rng.exponential(gap.rate_per_day);
            return rng.normal(gap.mu_days, gap.sigma_days);
    }
    return 1.0;
}

}  // namespace

InteractionLog generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    InteractionLog log;
    log.num_users = cfg.num_users;
    log.num_items = cfg.num_items;
    log.interactions.reserve(static_cast<std::size_t>(cfg.num_users) *
                             static_cast<std::size_t>(cfg.interactions_per_user));

    const ZipfSampler zipf(static_cast<std::size_t>(cfg.num_items), cfg.popularity_exponent);
    Rng rng = Rng::stream(cfg.rng_seed, "synthetic");

    std::vector<std::int64_t> last_time(static_cast<std::size_t>(cfg.num_items), -1);
    std::vector<char> is_consumed(static_cast<std::size_t>(cfg.num_items), 0);
    std::vector<std::int32_t> consumed;
    std::vector<std::int32_t> eligible;

    for (std::int32_t u = 0; u < cfg.num_users; ++u) {
        consumed.clear();
        std::fill(is_consumed.begin(), is_consumed.end(), 0);
        std::int64_t t = 0;

        for (std::int32_t e = 0; e < cfg.interactions_per_user; ++e) {
            const bool coin = rng.uniform() < cfg.repeat_prob;
            if (coin && !consumed.empty()) {
                double gap_days = draw_gap_days(cfg.gap, rng);
                // truncate below so time still moves forward
                std::int64_t gap_sec =
                    std::max<std::int64_t>(1, std::llround(gap_days * kSecondsPerDay));
                // items consumed recently enough that last_time + gap lands
                // after the current time; the most recent item always
                // qualifies, so this is never empty
                eligible.clear();
                for (std::int32_t j : consumed) {
                    if (t - last_time[static_cast<std::size_t>(j)] < gap_sec) {
                        eligible.push_back(j);
                    }
                }
                const std::int32_t item = eligible[rng.uniform_index(eligible.size())];
                t = last_time[static_cast<std::size_t>(item)] + gap_sec;
                last_time[static_cast<std::size_t>(item)] = t;
                log.interactions.push_back({u, item, t});
            } else {
                const std::int64_t gap_sec =
                    1 + static_cast<std::int64_t>(rng.uniform_index(86400));
                std::int32_t item = -1;
                for (int attempt = 0; attempt < 100; ++attempt) {
                    const auto candidate = static_cast<std::int32_t>(zipf.sample(rng));
                    if (!is_consumed[static_cast<std::size_t>(candidate)]) {
                        item = candidate;
                        break;
                    }
                    item = candidate;  // kept if the catalog turns out exhausted
                }
                if (item != -1 && is_consumed[static_cast<std::size_t>(item)]) {
                    // popular ranks all taken; deterministic scan for any novel item
                    for (std::int32_t j = 0; j < cfg.num_items; ++j) {
                        if (!is_consumed[static_cast<std::size_t>(j)]) {
                            item = j;
                            break;
                        }
                    }
                }
                t += gap_sec;
                if (!is_consumed[static_cast<std::size_t>(item)]) {
                    is_consumed[static_cast<std::size_t>(item)] = 1;
                    consumed.push_back(item);
                }
                last_time[static_cast<std::size_t>(item)] = t;
                log.interactions.push_back({u, item, t});
            }
        }
        for (std::int32_t j : consumed) last_time[static_cast<std::size_t>(j)] = -1;
    }
    return log;
}

double repeat_ratio(const InteractionLog& log) {
    if (log.interactions.empty()) return 0.0;
    const auto histories = build_histories(log);
    std::size_t repeats = 0;
    std::size_t total = 0;
    for (const UserHistory& h : histories) {
        std::unordered_set<std::int32_t> seen;
        for (const Event& ev : h.events) {
            if (!seen.insert(ev.item).second) ++repeats;
            ++total;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(repeats) / static_cast<double>(total);
}

double user_repeat_ratio(const UserHistory& history) {
    if (history.events.empty()) return 0.0;
    std::unordered_set<std::int32_t> seen;
    std::size_t repeats = 0;
    for (const Event& ev : history.events) {
        if (!seen.insert(ev.item).second) ++repeats;
    }
    return static_cast<double>(repeats) / static_cast<double>(history.events.size());
}

}  // namespace recode
