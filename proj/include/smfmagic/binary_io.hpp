// Copyright 2026 The smfmagic Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace smfmagic {

/// Little helper for the checkpoint format: raw trivially-copyable values and
/// length-prefixed vectors, in host byte order.
class BinaryWriter {
  public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    template <typename T>
    void put(const T& value) {
        static_assert(std::is_trivially_copyable_v<T>);
        out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
    }
    template <typename T>
    void put_vector(const std::vector<T>& values) {
        static_assert(std::is_trivially_copyable_v<T>);
        put<std::uint64_t>(values.size());
        if (!values.empty()) {
            out_.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(T)));
        }
    }
    void put_string(const std::string& s) {
        put<std::uint64_t>(s.size());
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

  private:
    std::ostream& out_;
};

class BinaryReader {
  public:
    explicit BinaryReader(std::istream& in) : in_(in) {}

    template <typename T>
    T get() {
        static_assert(std::is_trivially_copyable_v<T>);
        T value;
        in_.read(reinterpret_cast<char*>(&value), sizeof(T));
        if (!in_) throw std::runtime_error("checkpoint truncated");
        return value;
    }
    template <typename T>
    std::vector<T> get_vector(std::uint64_t max_size = 1ull << 32) {
        auto size = get<std::uint64_t>();
        if (size > max_size) throw std::runtime_error("checkpoint corrupt: implausible vector length");
        std::vector<T> values(size);
        if (size > 0) {
            in_.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(size * sizeof(T)));
            if (!in_) throw std::runtime_error("checkpoint truncated");
        }
        return values;
    }
    std::string get_string() {
        auto v = get_vector<char>(1u << 20);
        return std::string(v.begin(), v.end());
    }

  private:
    std::istream& in_;
};

}  // namespace smfmagic
