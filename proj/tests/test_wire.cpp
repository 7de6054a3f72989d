#include "attacksim/error.hpp"
#include "attacksim/syscall.hpp"

#include "doctest.h"
#include "support.hpp"

using namespace attacksim;

namespace {

SyscallRequest random_request(testing::Gen& g) {
    SyscallRequest r;
    r.opcode = static_cast<Opcode>(g.between(1, 15));
    auto n = g.between(0, 6);
    for (std::uint64_t i = 0; i < n; ++i) {
        if (g.coin()) r.args.emplace_back(g.any_int());
        else r.args.emplace_back(g.bytes(64));
    }
    return r;
}

SyscallResponse random_response(testing::Gen& g) {
    SyscallResponse r;
    r.status = static_cast<SysStatus>(g.between(0, 13));
    auto n = g.between(0, 6);
    for (std::uint64_t i = 0; i < n; ++i) {
        if (g.coin()) r.results.emplace_back(g.any_int());
        else r.results.emplace_back(g.bytes(64));
    }
    return r;
}

} // namespace

TEST_SUITE("wire") {

TEST_CASE("request layout matches the documented byte format") {
    auto bytes = encode(sys::sleep(5));
    const std::string expected("\x01\x0f\x00\x01\x00\x00\x00\x00\x05\x00\x00\x00\x00\x00\x00\x00", 16);
    CHECK(bytes == expected);

    auto open = encode(sys::open("/a", 2));
    const std::string open_expected("\x01\x01\x00\x02\x00\x00\x00"
                                    "\x01\x02\x00\x00\x00/a"
                                    "\x00\x02\x00\x00\x00\x00\x00\x00\x00",
                                    23);
    CHECK(open == open_expected);
}

TEST_CASE("response layout carries a signed status") {
    SyscallResponse r{SysStatus::Refused, {std::int64_t{-1}}};
    const std::string expected("\x01\x03\x00\x00\x00\x01\x00\x00\x00\x00\xff\xff\xff\xff\xff\xff\xff\xff", 18);
    CHECK(encode(r) == expected);
}

TEST_CASE("random requests and responses round trip") {
    testing::Gen g(7);
    for (int i = 0; i < 1000; ++i) {
        auto req = random_request(g);
        CHECK(decode_request(encode(req)) == req);
        auto res = random_response(g);
        CHECK(decode_response(encode(res)) == res);
    }
}

TEST_CASE("every strict prefix and any trailing byte is rejected") {
    testing::Gen g(11);
    for (int i = 0; i < 50; ++i) {
        auto bytes = encode(random_request(g));
        for (std::size_t n = 0; n < bytes.size(); ++n) CHECK_THROWS_AS(decode_request(bytes.substr(0, n)), Error);
        CHECK_THROWS_AS(decode_request(bytes + "x"), Error);
    }
}

TEST_CASE("unknown opcode, version or tag is rejected") {
    auto bytes = encode(sys::get_info("os"));
    auto bad_version = bytes;
    bad_version[0] = 2;
    CHECK_THROWS_AS(decode_request(bad_version), Error);
    auto bad_op = bytes;
    bad_op[1] = 99;
    CHECK_THROWS_AS(decode_request(bad_op), Error);
    auto bad_tag = bytes;
    bad_tag[7] = 5;
    CHECK_THROWS_AS(decode_request(bad_tag), Error);
}

TEST_CASE("frames survive arbitrary stream segmentation") {
    testing::Gen g(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> payloads;
        std::string stream;
        for (auto n = g.between(1, 8); n > 0; --n) {
            payloads.push_back(g.bytes(40));
            stream += frame(payloads.back());
        }
        std::string buffer;
        std::vector<std::string> got;
        std::size_t pos = 0;
        while (pos < stream.size()) {
            auto len = g.between(1, 9);
            buffer += stream.substr(pos, len);
            pos += len;
            while (auto f = take_frame(buffer)) got.push_back(*f);
        }
        CHECK(got == payloads);
        CHECK(buffer.empty());
    }
}

TEST_CASE("argument accessors type-check") {
    auto r = sys::connect(3, "10.0.0.1", 80);
    CHECK(r.int_arg(0) == 3);
    CHECK(r.bytes_arg(1) == "10.0.0.1");
    CHECK_THROWS_AS(r.int_arg(1), Error);
    CHECK_THROWS_AS(r.bytes_arg(7), Error);
}

TEST_CASE("addresses parse and print") {
    CHECK(Ipv4::from_string("10.1.2.3").to_string() == "10.1.2.3");
    CHECK_FALSE(Ipv4::parse("10.1.2").has_value());
    CHECK_FALSE(Ipv4::parse("10.1.2.256").has_value());
    auto c = Cidr::from_string("192.168.1.0/24");
    CHECK(c.contains(Ipv4::from_string("192.168.1.77")));
    CHECK_FALSE(c.contains(Ipv4::from_string("192.168.2.1")));
    CHECK(c.host_count() == 254);
    CHECK(c.host(0).to_string() == "192.168.1.1");
}

}
