#pragma once

// Two-half register words and the four register primitives: read, write,
// half-max and max-write. The same semantics back the single-threaded
// simulator (RegisterWord) and the concurrent build (AtomicRegisterWord).

#include <atomic>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace hmcas {

using word_t = std::uint64_t;

/// Raised when a value does not fit the configured field width, or when a
/// packed counter would wrap.
class register_overflow : public std::overflow_error {
public:
    using std::overflow_error::overflow_error;
};

/// Bit width W of each half of a register (1..64).
class FieldWidth {
public:
    constexpr FieldWidth() = default;
    constexpr explicit FieldWidth(unsigned bits) : bits_(bits) {
        if (bits == 0 || bits > 64) {
            throw std::invalid_argument("field width must be in 1..64, got " + std::to_string(bits));
        }
    }

    constexpr unsigned bits() const noexcept { return bits_; }
    constexpr word_t max_value() const noexcept {
        return bits_ == 64 ? ~word_t{0} : (word_t{1} << bits_) - 1;
    }
    constexpr bool fits(word_t v) const noexcept { return v <= max_value(); }

    void check(word_t v, const char* what) const {
        if (!fits(v)) {
            throw register_overflow(std::string(what) + " value " + std::to_string(v) +
                                    " exceeds " + std::to_string(bits_) + "-bit field");
        }
    }

    friend constexpr bool operator==(FieldWidth, FieldWidth) = default;

private:
    unsigned bits_ = 64;
};

/// (hi, lo) pair. hi is the "first half" that half-max and max-write order on.
struct RegisterWord {
    word_t hi = 0;
    word_t lo = 0;

    friend constexpr bool operator==(const RegisterWord&, const RegisterWord&) = default;
};

enum class Primitive : std::uint8_t { read, write, half_max, max_write };

inline const char* to_string(Primitive p) noexcept {
    switch (p) {
    case Primitive::read: return "read";
    case Primitive::write: return "write";
    case Primitive::half_max: return "half_max";
    case Primitive::max_write: return "max_write";
    }
    return "?";
}

// Sequential semantics. These are the reference the atomic versions follow.

constexpr RegisterWord read(const RegisterWord& reg) noexcept { return reg; }

inline void write(RegisterWord& reg, word_t hi, word_t lo, FieldWidth w = {}) {
    w.check(hi, "write hi");
    w.check(lo, "write lo");
    reg = {hi, lo};
}

inline void half_max(RegisterWord& reg, word_t x, FieldWidth w = {}) {
    w.check(x, "half_max");
    if (x > reg.hi) reg.hi = x;
}

// x == hi still writes.
inline void max_write(RegisterWord& reg, word_t x, word_t y, FieldWidth w = {}) {
    w.check(x, "max_write hi");
    w.check(y, "max_write lo");
    if (x >= reg.hi) reg = {x, y};
}

/// Apply one primitive; returns the value read (read) or the post-state
/// (all other primitives).
inline RegisterWord apply(RegisterWord& reg, Primitive p, word_t x, word_t y, FieldWidth w = {}) {
    switch (p) {
    case Primitive::read: break;
    case Primitive::write: write(reg, x, y, w); break;
    case Primitive::half_max: half_max(reg, x, w); break;
    case Primitive::max_write: max_write(reg, x, y, w); break;
    }
    return reg;
}

/// Register word shared between threads. Both halves live in one 128-bit
/// atomic unit; half-max and max-write are compare-exchange loops on it.
class AtomicRegisterWord {
    using unit_t = unsigned __int128;

public:
    AtomicRegisterWord() = default;
    explicit AtomicRegisterWord(RegisterWord init) : unit_(pack(init)) {}

    AtomicRegisterWord(const AtomicRegisterWord&) = delete;
    AtomicRegisterWord& operator=(const AtomicRegisterWord&) = delete;

    RegisterWord read() const noexcept { return unpack(unit_.load(std::memory_order_seq_cst)); }

    void write(word_t hi, word_t lo, FieldWidth w = {}) {
        w.check(hi, "write hi");
        w.check(lo, "write lo");
        unit_.store(pack({hi, lo}), std::memory_order_seq_cst);
    }

    RegisterWord half_max(word_t x, FieldWidth w = {}) {
        w.check(x, "half_max");
        unit_t cur = unit_.load(std::memory_order_seq_cst);
        for (;;) {
            RegisterWord old = unpack(cur);
            if (x <= old.hi) return old;
            if (unit_.compare_exchange_weak(cur, pack({x, old.lo}), std::memory_order_seq_cst)) {
                return {x, old.lo};
            }
        }
    }

    RegisterWord max_write(word_t x, word_t y, FieldWidth w = {}) {
        w.check(x, "max_write hi");
        w.check(y, "max_write lo");
        unit_t cur = unit_.load(std::memory_order_seq_cst);
        for (;;) {
            RegisterWord old = unpack(cur);
            if (x < old.hi) return old;
            if (unit_.compare_exchange_weak(cur, pack({x, y}), std::memory_order_seq_cst)) {
                return {x, y};
            }
        }
    }

    RegisterWord apply(Primitive p, word_t x, word_t y, FieldWidth w = {}) {
        switch (p) {
        case Primitive::read: return read();
        case Primitive::write: write(x, y, w); return {x, y};
        case Primitive::half_max: return half_max(x, w);
        case Primitive::max_write: return max_write(x, y, w);
        }
        return read();
    }

private:
    static constexpr unit_t pack(RegisterWord r) noexcept {
        return (unit_t{r.hi} << 64) | unit_t{r.lo};
    }
    static constexpr RegisterWord unpack(unit_t u) noexcept {
        return {static_cast<word_t>(u >> 64), static_cast<word_t>(u)};
    }

    alignas(16) std::atomic<unit_t> unit_{0};
};

/// Layout of the competition register: seq in hi, (pid, c) packed into lo with
/// pid in the top B bits, B = ceil(log2(n)) + 1.
class PackedPLayout {
public:
    PackedPLayout(std::size_t n, FieldWidth w) : n_(n), width_(w) {
        if (n == 0) throw std::invalid_argument("process count must be at least 1");
        pid_bits_ = static_cast<unsigned>(std::bit_width(n - 1)) + 1;  // ceil(log2 n) + 1
        if (pid_bits_ >= w.bits()) {
            throw register_overflow("process count " + std::to_string(n) + " needs " +
                                    std::to_string(pid_bits_) + " pid bits; field is only " +
                                    std::to_string(w.bits()) + " bits");
        }
    }

    unsigned pid_bits() const noexcept { return pid_bits_; }
    unsigned count_bits() const noexcept { return width_.bits() - pid_bits_; }
    word_t max_count() const noexcept { return (word_t{1} << count_bits()) - 1; }

    word_t pack_lo(std::size_t pid, word_t c) const {
        if (pid < 1 || pid > n_) {
            throw std::out_of_range("pid " + std::to_string(pid) + " outside 1.." + std::to_string(n_));
        }
        if (c > max_count()) {
            throw register_overflow("operation counter " + std::to_string(c) + " exceeds " +
                                    std::to_string(count_bits()) + "-bit budget");
        }
        return (word_t{pid} << count_bits()) | c;
    }

    RegisterWord pack(word_t seq, std::size_t pid, word_t c) const {
        width_.check(seq, "P.seq");
        return {seq, pack_lo(pid, c)};
    }

    struct Fields {
        word_t seq;
        std::size_t pid;
        word_t c;
        friend constexpr bool operator==(const Fields&, const Fields&) = default;
    };

    Fields unpack(RegisterWord w) const noexcept {
        return {w.hi, static_cast<std::size_t>(w.lo >> count_bits()), w.lo & max_count()};
    }

    std::size_t processes() const noexcept { return n_; }
    FieldWidth width() const noexcept { return width_; }

private:
    std::size_t n_;
    FieldWidth width_;
    unsigned pid_bits_ = 1;
};

}  // namespace hmcas
