#pragma once

#include "ustat/error.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ustat {

/// Subset of the axes {0, ..., 31}. Axes are zero-based in code and printed
/// one-based ("{1,3}").
class AxisSet {
public:
    static constexpr int max_axes = 32;

    constexpr AxisSet() = default;
    static constexpr AxisSet from_bits(std::uint32_t bits) {
        AxisSet s;
        s.bits_ = bits;
        return s;
    }
    static AxisSet of(std::initializer_list<int> axes) {
        AxisSet s;
        for (int a : axes) {
            s = s.with(a);
        }
        return s;
    }
    static constexpr AxisSet full(int order) {
        return from_bits(order >= max_axes ? ~0u : ((1u << order) - 1u));
    }

    [[nodiscard]] AxisSet with(int axis) const {
        if (axis < 0 || axis >= max_axes) {
            throw DomainError("axis index out of range: " + std::to_string(axis));
        }
        return from_bits(bits_ | (1u << axis));
    }
    [[nodiscard]] constexpr bool contains(int axis) const { return (bits_ >> axis) & 1u; }
    [[nodiscard]] constexpr int size() const { return std::popcount(bits_); }
    [[nodiscard]] constexpr bool empty() const { return bits_ == 0; }
    [[nodiscard]] constexpr std::uint32_t bits() const { return bits_; }
    [[nodiscard]] constexpr int lowest() const { return std::countr_zero(bits_); }
    [[nodiscard]] constexpr bool subset_of(AxisSet other) const {
        return (bits_ & ~other.bits_) == 0;
    }
    [[nodiscard]] constexpr AxisSet complement(int order) const {
        return from_bits(full(order).bits_ & ~bits_);
    }

    [[nodiscard]] std::vector<int> elements() const {
        std::vector<int> out;
        for (std::uint32_t b = bits_; b != 0; b &= b - 1) {
            out.push_back(std::countr_zero(b));
        }
        return out;
    }

    /// Position of `axis` among the members of this set.
    [[nodiscard]] int rank_of(int axis) const {
        return std::popcount(bits_ & ((1u << axis) - 1u));
    }

    [[nodiscard]] std::string to_string() const {
        std::string s = "{";
        bool first = true;
        for (int a : elements()) {
            if (!first) {
                s += ',';
            }
            s += std::to_string(a + 1);
            first = false;
        }
        return s + "}";
    }

    friend constexpr AxisSet operator|(AxisSet a, AxisSet b) { return from_bits(a.bits_ | b.bits_); }
    friend constexpr AxisSet operator&(AxisSet a, AxisSet b) { return from_bits(a.bits_ & b.bits_); }
    friend constexpr bool operator==(AxisSet a, AxisSet b) = default;

private:
    std::uint32_t bits_ = 0;
};

/// A partition of a ground set of axes into nonempty disjoint blocks. Blocks
/// are kept sorted by their smallest axis, so equal partitions compare equal
/// and have the same encoding.
class Partition {
public:
    /// The empty partition of the empty ground set (degree 0).
    Partition() = default;

    explicit Partition(std::vector<AxisSet> blocks) : blocks_(std::move(blocks)) {
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            if (blocks_[k].empty()) {
                throw InvalidPartition("empty block");
            }
            if ((ground_ & blocks_[k]).bits() != 0) {
                throw InvalidPartition("blocks not disjoint");
            }
            ground_ = ground_ | blocks_[k];
        }
        std::sort(blocks_.begin(), blocks_.end(),
                  [](AxisSet a, AxisSet b) { return a.lowest() < b.lowest(); });
    }

    static Partition single_block(AxisSet ground) {
        return ground.empty() ? Partition() : Partition({ground});
    }

    static Partition singletons(AxisSet ground) {
        std::vector<AxisSet> blocks;
        for (int a : ground.elements()) {
            blocks.push_back(AxisSet().with(a));
        }
        return Partition(std::move(blocks));
    }

    /// Parses "{1,3}|{2}" (one-based axes). "{}" and "" denote the empty partition.
    static Partition parse(std::string_view text) {
        std::string s;
        for (char c : text) {
            if (!std::isspace(static_cast<unsigned char>(c))) {
                s += c;
            }
        }
        if (s.empty() || s == "{}") {
            return {};
        }
        std::vector<AxisSet> blocks;
        std::size_t pos = 0;
        while (true) {
            if (pos >= s.size() || s[pos] != '{') {
                throw InvalidPartition("malformed partition '" + std::string(text) + "'");
            }
            const auto close = s.find('}', pos);
            if (close == std::string::npos) {
                throw InvalidPartition("malformed partition '" + std::string(text) + "'");
            }
            AxisSet block;
            std::string_view body(s.data() + pos + 1, close - pos - 1);
            if (body.empty()) {
                throw InvalidPartition("empty block");
            }
            while (!body.empty()) {
                const auto comma = body.find(',');
                const auto token = body.substr(0, comma);
                int axis = 0;
                if (token.empty() || token.size() > 2 ||
                    !std::all_of(token.begin(), token.end(),
                                 [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
                    throw InvalidPartition("malformed axis '" + std::string(token) + "'");
                }
                axis = std::stoi(std::string(token));
                if (axis < 1 || axis > AxisSet::max_axes) {
                    throw InvalidPartition("axis out of range: " + std::string(token));
                }
                if (block.contains(axis - 1)) {
                    throw InvalidPartition("repeated axis within a block");
                }
                block = block.with(axis - 1);
                if (comma == std::string_view::npos) {
                    break;
                }
                body.remove_prefix(comma + 1);
                if (body.empty()) {
                    throw InvalidPartition("malformed partition '" + std::string(text) + "'");
                }
            }
            blocks.push_back(block);
            pos = close + 1;
            if (pos == s.size()) {
                break;
            }
            if (s[pos] != '|') {
                throw InvalidPartition("malformed partition '" + std::string(text) + "'");
            }
            ++pos;
        }
        return Partition(std::move(blocks));
    }

    [[nodiscard]] AxisSet ground() const { return ground_; }
    [[nodiscard]] const std::vector<AxisSet>& blocks() const { return blocks_; }
    [[nodiscard]] int degree() const { return static_cast<int>(blocks_.size()); }

    /// Relabels axes by their rank inside `within`, which must contain the ground set.
    [[nodiscard]] Partition localized(AxisSet within) const {
        if (!ground_.subset_of(within)) {
            throw InvalidPartition("partition ground set is not inside the target axis set");
        }
        std::vector<AxisSet> blocks;
        for (auto b : blocks_) {
            AxisSet local;
            for (int a : b.elements()) {
                local = local.with(within.rank_of(a));
            }
            blocks.push_back(local);
        }
        return Partition(std::move(blocks));
    }

    /// Canonical encoding, e.g. "{1,2}|{3}"; the empty partition encodes as "{}".
    [[nodiscard]] std::string to_string() const {
        if (blocks_.empty()) {
            return "{}";
        }
        std::string s;
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            if (k > 0) {
                s += '|';
            }
            s += blocks_[k].to_string();
        }
        return s;
    }

    friend bool operator==(const Partition& a, const Partition& b) {
        return a.ground_ == b.ground_ && a.blocks_ == b.blocks_;
    }

private:
    AxisSet ground_;
    std::vector<AxisSet> blocks_;
};

/// True iff every block of `finer` lies inside some block of `coarser`.
inline bool partition_coarsens(const Partition& finer, const Partition& coarser) {
    if (finer.ground() != coarser.ground()) {
        throw DomainError("partitions have different ground sets");
    }
    return std::all_of(finer.blocks().begin(), finer.blocks().end(), [&](AxisSet b) {
        return std::any_of(coarser.blocks().begin(), coarser.blocks().end(),
                           [&](AxisSet c) { return b.subset_of(c); });
    });
}

/// All set partitions of `ground`, each once, in restricted-growth-string
/// order (the single-block partition first). The empty set has one partition.
inline std::vector<Partition> enumerate_partitions(AxisSet ground) {
    const auto elems = ground.elements();
    const std::size_t k = elems.size();
    if (k == 0) {
        return {Partition()};
    }
    std::vector<Partition> out;
    std::vector<int> rgs(k, 0);
    std::vector<int> prefix_max(k, 0);
    while (true) {
        const int blocks = prefix_max[k - 1] + 1;
        std::vector<AxisSet> parts(static_cast<std::size_t>(blocks));
        for (std::size_t i = 0; i < k; ++i) {
            parts[static_cast<std::size_t>(rgs[i])] = parts[static_cast<std::size_t>(rgs[i])].with(elems[i]);
        }
        out.emplace_back(std::move(parts));

        std::size_t i = k - 1;
        while (i > 0 && rgs[i] == prefix_max[i - 1] + 1) {
            --i;
        }
        if (i == 0) {
            break;
        }
        ++rgs[i];
        prefix_max[i] = std::max(prefix_max[i - 1], rgs[i]);
        for (std::size_t j = i + 1; j < k; ++j) {
            rgs[j] = 0;
            prefix_max[j] = prefix_max[i];
        }
    }
    return out;
}

/// One (I, J) pair of a bound: a subset I of the axes and a partition J of I.
struct SubsetPartition {
    AxisSet subset;
    Partition partition;
};

/// Every (I, J) with I a subset of {0..order-1} and J a partition of I, ordered
/// by (|I|, encoding of J). This order realizes the tie rule used by the
/// bound evaluators.
inline std::vector<SubsetPartition> all_subset_partitions(int order) {
    std::vector<SubsetPartition> out;
    const std::uint32_t limit = 1u << order;
    for (std::uint32_t bits = 0; bits < limit; ++bits) {
        const auto subset = AxisSet::from_bits(bits);
        for (auto& p : enumerate_partitions(subset)) {
            out.push_back({subset, std::move(p)});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const SubsetPartition& a, const SubsetPartition& b) {
        if (a.subset.size() != b.subset.size()) {
            return a.subset.size() < b.subset.size();
        }
        return a.partition.to_string() < b.partition.to_string();
    });
    return out;
}

} // namespace ustat
