#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include <bfmresp/bitstream.hpp>
#include <bfmresp/fixture.hpp>
#include <bfmresp/ingest.hpp>
#include <bfmresp/pcap.hpp>

#include "oracles.hpp"

namespace {

using namespace bfmresp;

const std::string kData = BFMRESP_TEST_DATA;

// --- bitstream ---------------------------------------------------------------

TEST(Bitstream, HandTracedLsbFirst) {
    const std::vector<std::uint8_t> payload{0x27};
    const auto out = unpack_angle_bitstream(payload, 2, 1, QuantizationConfig::su_codebook0());
    ASSERT_EQ(out.angle_sets.size(), 1u);
    EXPECT_EQ(out.angle_sets[0].phi_indices[0], 7);
    EXPECT_EQ(out.angle_sets[0].psi_indices[0], 2);
    EXPECT_EQ(out.trailing_bits, 2u);
}

TEST(Bitstream, WireOrderInterleavesPerColumn) {
    // 3x2, b_phi = 4, b_psi = 2: phi11 phi21 psi21 psi31 phi22 psi32 = 4+4+2+2+4+2 = 18 bits
    const QuantizationConfig q = QuantizationConfig::su_codebook0();
    AngleSet a{3, 2, {0x1, 0x2, 0x3}, {0x1, 0x2, 0x3}, q};
    const auto bytes = pack_angle_bitstream(std::span<const AngleSet>(&a, 1));
    // bits: 0001 | 0010 | 01 | 10 | 0011 | 11 (each LSB first) -> 0x21, 0x39, 0x03
    ASSERT_EQ(bytes.size(), 3u);
    EXPECT_EQ(bytes[0], 0x21);
    EXPECT_EQ(bytes[1], 0x39);
    EXPECT_EQ(bytes[2], 0x03);
}

TEST(Bitstream, AllZeroPayload) {
    const std::vector<std::uint8_t> payload(60, 0);
    const auto out = unpack_angle_bitstream(payload, 4, 4, QuantizationConfig::su_codebook1());
    EXPECT_EQ(out.angle_sets.size(), 8u);  // 480 bits / 60
    for (const auto& a : out.angle_sets) {
        for (auto k : a.phi_indices) EXPECT_EQ(k, 0);
        for (auto k : a.psi_indices) EXPECT_EQ(k, 0);
    }
}

TEST(Bitstream, SubcarrierCountFromReportLength) {
    EXPECT_EQ(bits_per_subcarrier(4, 4, QuantizationConfig::su_codebook1()), 60u);
    const std::vector<std::uint8_t> payload(1875, 0xa5);
    const auto out = unpack_angle_bitstream(payload, 4, 4, QuantizationConfig::su_codebook1());
    EXPECT_EQ(out.angle_sets.size(), 250u);
    EXPECT_EQ(out.trailing_bits, 0u);
}

TEST(Bitstream, TooShortIsTruncated) {
    const std::vector<std::uint8_t> payload(7, 0);  // 56 < 60 bits
    EXPECT_THROW(unpack_angle_bitstream(payload, 4, 4, QuantizationConfig::su_codebook1()),
                 TruncatedReportError);
}

TEST(Bitstream, PackUnpackProperty) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const CaptureStream s = oracle::random_stream(rng, 1);
        const auto& sets = s.records[0].angle_sets;
        const auto bytes = pack_angle_bitstream(sets);
        const auto& a = sets.front();
        if (bits_per_subcarrier(a.n_rows, a.n_cols, a.config) == 0) continue;
        const auto out = unpack_angle_bitstream(bytes, a.n_rows, a.n_cols, a.config);
        // zero padding of the last byte may add whole subcarriers only when a
        // subcarrier fits in fewer than 8 bits
        ASSERT_GE(out.angle_sets.size(), sets.size());
        for (std::size_t i = 0; i < sets.size(); ++i) EXPECT_EQ(out.angle_sets[i], sets[i]);
    }
}

// --- fixture -----------------------------------------------------------------

TEST(Fixture, EmptyStreamIsHeaderOnly) {
    std::stringstream ss;
    write_fixture(CaptureStream{}, ss);
    std::string text = ss.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
    const CaptureStream back = read_fixture(ss);
    EXPECT_TRUE(back.records.empty());
}

TEST(Fixture, RoundTripProperty) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        CaptureStream s = oracle::random_stream(rng, 1 + trial % 7);
        if (trial % 2) s.metadata.duration = 12.5;
        std::stringstream ss;
        write_fixture(s, ss);
        const CaptureStream back = read_fixture(ss);
        ASSERT_EQ(back.records.size(), s.records.size());
        EXPECT_EQ(back.metadata.duration, s.metadata.duration);
        for (std::size_t i = 0; i < s.records.size(); ++i) {
            EXPECT_NEAR(back.records[i].timestamp, s.records[i].timestamp, 1e-9);
            EXPECT_EQ(back.records[i].angle_sets, s.records[i].angle_sets);
        }
    }
}

TEST(Fixture, TableSizedRecordRoundTrips) {
    std::mt19937_64 rng(29);
    CaptureStream s;
    BfmFrameRecord r;
    r.n_rows = r.n_cols = 4;
    r.n_subcarriers = 250;
    for (int k = 0; k < 250; ++k)
        r.angle_sets.push_back(oracle::random_angle_set(4, 4, QuantizationConfig{}, rng));
    s.records.push_back(r);
    std::stringstream ss;
    write_fixture(s, ss);
    const CaptureStream back = read_fixture(ss);
    ASSERT_EQ(back.records.size(), 1u);
    EXPECT_EQ(back.records[0].angle_sets, r.angle_sets);
}

TEST(Fixture, OutOfRangeIndexNamesLineAndField) {
    std::stringstream ss;
    ss << R"({"format":"bfm-fixture/1","n_rows":2,"n_cols":1,"b_phi":4,"b_psi":2,"n_subcarriers":1})" << '\n'
       << R"({"t":0,"phi":[[3]],"psi":[[1]]})" << '\n'
       << R"({"t":0.2,"phi":[[3]],"psi":[[4]]})" << '\n';
    try {
        read_fixture(ss);
        FAIL();
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
        EXPECT_NE(msg.find("psi[0][0]"), std::string::npos) << msg;
    }
}

TEST(Fixture, SchemaViolations) {
    auto parse = [](const std::string& text) {
        std::stringstream ss(text);
        return read_fixture(ss);
    };
    const std::string header =
        R"({"format":"bfm-fixture/1","n_rows":2,"n_cols":1,"b_phi":4,"b_psi":2,"n_subcarriers":1})"
        "\n";
    EXPECT_THROW(parse(""), ParseError);
    EXPECT_THROW(parse("{\"format\":\"other\"}\n"), ParseError);
    EXPECT_THROW(parse(header + "not json\n"), ParseError);
    EXPECT_THROW(parse(header + R"({"phi":[[1]],"psi":[[1]]})" "\n"), ParseError);
    EXPECT_THROW(parse(header + R"({"t":0,"phi":[[1,2]],"psi":[[1]]})" "\n"), ParseError);
    EXPECT_THROW(parse(header + R"({"t":1,"phi":[[1]],"psi":[[1]]})" "\n"
                                R"({"t":0,"phi":[[1]],"psi":[[1]]})" "\n"),
                 ParseError);
}

// --- pcap --------------------------------------------------------------------

std::vector<std::uint8_t> pcap_header(std::uint32_t magic = 0xa1b2c3d4) {
    std::vector<std::uint8_t> out;
    auto le = [&](std::uint32_t v, int n) {
        for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    le(magic, 4);
    le(2, 2);
    le(4, 2);
    le(0, 4);
    le(0, 4);
    le(65535, 4);
    le(127, 4);
    return out;
}

void append_packet(std::vector<std::uint8_t>& out, std::uint32_t sec, std::uint32_t frac,
                   const std::vector<std::uint8_t>& pkt) {
    auto le = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    le(sec);
    le(frac);
    le(static_cast<std::uint32_t>(pkt.size()));
    le(static_cast<std::uint32_t>(pkt.size()));
    out.insert(out.end(), pkt.begin(), pkt.end());
}

// Hand-assembled radiotap + Action frame: 2x1, SU codebook 0, one angle byte 0x27.
std::vector<std::uint8_t> hand_feedback_packet() {
    return {
        0x00, 0x00, 0x08, 0x00, 0x00, 0x00, 0x00, 0x00,  // radiotap, no fields
        0xd0, 0x00, 0x00, 0x00,                          // FC: mgmt Action, duration
        0x0a, 0x0a, 0x0a, 0x0a, 0x0a, 0x01,              // addr1 (AP)
        0x0b, 0x0b, 0x0b, 0x0b, 0x0b, 0x02,              // addr2 (STA)
        0x0a, 0x0a, 0x0a, 0x0a, 0x0a, 0x01,              // BSSID
        0x00, 0x00,                                      // sequence control
        21, 0,                                           // VHT, compressed beamforming
        0x08, 0x80, 0x00,                                // MIMO control: Nc=1, Nr=2, first segment
        0x30,                                            // average SNR, 1 stream
        0x27,                                            // angles
    };
}

TEST(Pcap, HandAssembledFrame) {
    auto bytes = pcap_header();
    append_packet(bytes, 100, 500000, hand_feedback_packet());
    append_packet(bytes, 100, 700000, hand_feedback_packet());
    const CaptureStream s = parse_pcap(bytes);
    ASSERT_EQ(s.records.size(), 2u);
    EXPECT_EQ(s.metadata.skipped_frames, 0u);
    const auto& r = s.records[0];
    EXPECT_EQ(r.n_rows, 2);
    EXPECT_EQ(r.n_cols, 1);
    EXPECT_EQ(r.n_subcarriers, 1);
    EXPECT_EQ(r.angle_sets[0].phi_indices[0], 7);
    EXPECT_EQ(r.angle_sets[0].psi_indices[0], 2);
    EXPECT_EQ(r.config(), QuantizationConfig::su_codebook0());
    EXPECT_EQ(format_mac(r.source), "0b:0b:0b:0b:0b:02");
    EXPECT_EQ(format_mac(r.dest), "0a:0a:0a:0a:0a:01");
    EXPECT_DOUBLE_EQ(s.records[0].timestamp, 0.0);
    EXPECT_NEAR(s.records[1].timestamp, 0.2, 1e-9);
}

TEST(Pcap, ByteSwappedNanosecondHeader) {
    // big-endian file: header and record fields byte-swapped
    std::vector<std::uint8_t> bytes{0xa1, 0xb2, 0x3c, 0x4d, 0, 2, 0, 4, 0, 0, 0, 0,
                                    0,    0,    0,    0,    0, 0, 0xff, 0xff, 0, 0, 0, 127};
    const auto pkt = hand_feedback_packet();
    for (std::uint32_t frac : {0u, 250000000u}) {
        for (std::uint32_t v : {std::uint32_t{5}, frac, static_cast<std::uint32_t>(pkt.size()),
                                static_cast<std::uint32_t>(pkt.size())})
            for (int i = 3; i >= 0; --i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        bytes.insert(bytes.end(), pkt.begin(), pkt.end());
    }
    const CaptureStream s = parse_pcap(bytes);
    ASSERT_EQ(s.records.size(), 2u);
    EXPECT_NEAR(s.records[1].timestamp, 0.25, 1e-12);
}

TEST(Pcap, RadiotapFcsAndHtControl) {
    auto pkt = hand_feedback_packet();
    // radiotap with TSFT + Flags(FCS): present = 0x3, len = 8 + 8 (TSFT) + 1 (flags) -> 17
    std::vector<std::uint8_t> rt{0x00, 0x00, 17, 0x00, 0x03, 0x00, 0x00, 0x00,
                                 1,    2,    3,  4,    5,    6,    7,    8,    0x10};
    std::vector<std::uint8_t> frame(pkt.begin() + 8, pkt.end());
    frame[1] |= 0x80;  // order bit: 4-byte HT Control after the header
    frame.insert(frame.begin() + 24, {0, 0, 0, 0});
    frame.insert(frame.end(), {0xde, 0xad, 0xbe, 0xef});  // FCS
    rt.insert(rt.end(), frame.begin(), frame.end());
    auto bytes = pcap_header();
    append_packet(bytes, 0, 0, rt);
    const CaptureStream s = parse_pcap(bytes);
    ASSERT_EQ(s.records.size(), 1u);
    EXPECT_EQ(s.records[0].angle_sets[0].phi_indices[0], 7);
}

TEST(Pcap, DataFramesOnlyIsEmptyCapture) {
    auto bytes = pcap_header();
    auto pkt = hand_feedback_packet();
    pkt[8] = 0x08;  // data frame
    for (int i = 0; i < 3; ++i) append_packet(bytes, 0, 0, pkt);
    try {
        parse_pcap(bytes);
        FAIL();
    } catch (const EmptyCaptureError& e) {
        EXPECT_NE(std::string(e.what()).find("3 skipped"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("not an action frame"), std::string::npos);
    }
}

TEST(Pcap, TruncatedFinalPacketCountsAsSkipped) {
    auto bytes = pcap_header();
    append_packet(bytes, 0, 0, hand_feedback_packet());
    append_packet(bytes, 1, 0, hand_feedback_packet());
    bytes.resize(bytes.size() - 5);
    const CaptureStream s = parse_pcap(bytes);
    EXPECT_EQ(s.records.size(), 1u);
    EXPECT_EQ(s.metadata.skipped_frames, 1u);
    EXPECT_EQ(s.metadata.skip_reasons.at("truncated packet"), 1u);
}

TEST(Pcap, AddressFilter) {
    auto bytes = pcap_header();
    append_packet(bytes, 0, 0, hand_feedback_packet());
    MacFilter f;
    f.sources.push_back({0x0b, 0x0b, 0x0b, 0x0b, 0x0b, 0x02});
    EXPECT_EQ(parse_pcap(bytes, f).records.size(), 1u);
    f.sources = {{1, 2, 3, 4, 5, 6}};
    EXPECT_THROW(parse_pcap(bytes, f), EmptyCaptureError);
}

TEST(Pcap, BadMagicAndLinkType) {
    std::vector<std::uint8_t> junk{1, 2, 3, 4, 5};
    EXPECT_THROW(parse_pcap(junk), ParseError);
    auto bytes = pcap_header();
    bytes[20] = 105;  // 802.11 without radiotap
    EXPECT_THROW(parse_pcap(bytes), ParseError);
    EXPECT_THROW(read_pcap(kData + "/does-not-exist.pcap"), IoError);
}

TEST(Pcap, WriterReaderRoundTrip) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        CaptureStream s = oracle::random_stream(rng, 5, 2);  // 1x1 carries no angles
        for (auto& r : s.records) r.source = {2, 0, 0, 0, 0, static_cast<std::uint8_t>(trial)};
        const bool ns = trial % 2;
        const auto bytes = build_pcap(s, {ns});
        const CaptureStream back = parse_pcap(bytes);
        ASSERT_EQ(back.records.size(), s.records.size());
        for (std::size_t i = 0; i < s.records.size(); ++i) {
            EXPECT_NEAR(back.records[i].timestamp, s.records[i].timestamp, ns ? 1e-9 : 1e-6);
            const auto& a = s.records[i].angle_sets;
            const auto& b = back.records[i].angle_sets;
            // trailing zero padding can decode as extra subcarriers for tiny shapes
            ASSERT_GE(b.size(), a.size());
            for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(b[k], a[k]);
            EXPECT_EQ(back.records[i].source, s.records[i].source);
        }
    }
}

TEST(Pcap, GoldenFixtureMatchesCommittedDump) {
    const CaptureStream pcap = read_pcap(kData + "/golden.pcap");
    const CaptureStream dump = read_fixture(kData + "/golden_anglesets.jsonl");
    ASSERT_EQ(pcap.records.size(), 10u);
    EXPECT_EQ(pcap.metadata.skipped_frames, 0u);
    ASSERT_EQ(dump.records.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(pcap.records[i].n_subcarriers, 52);
        EXPECT_NEAR(pcap.records[i].timestamp, dump.records[i].timestamp, 1e-9);
        EXPECT_EQ(pcap.records[i].angle_sets, dump.records[i].angle_sets);
    }
}

TEST(Pcap, MutationFuzzNeverCrashes) {
    std::ifstream is(kData + "/golden.pcap", std::ios::binary);
    const std::vector<std::uint8_t> golden((std::istreambuf_iterator<char>(is)),
                                           std::istreambuf_iterator<char>());
    ASSERT_FALSE(golden.empty());
    std::mt19937_64 rng(37);
    std::uniform_int_distribution<std::size_t> pos(0, golden.size() - 1);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<int> count(1, 8);
    for (int iter = 0; iter < 2000; ++iter) {
        auto bytes = golden;
        for (int m = count(rng); m > 0; --m) bytes[pos(rng)] = static_cast<std::uint8_t>(byte(rng));
        if (iter % 5 == 0) bytes.resize(pos(rng));
        try {
            const CaptureStream s = parse_pcap(bytes);
            for (const auto& r : s.records) r.validate();
        } catch (const Error&) {
        }
    }
}

TEST(Ingest, SniffsFormat) {
    EXPECT_EQ(sniff_capture_format(kData + "/golden.pcap"), CaptureFormat::Pcap);
    EXPECT_EQ(sniff_capture_format(kData + "/golden_anglesets.jsonl"), CaptureFormat::Fixture);
    EXPECT_EQ(load_capture(kData + "/golden.pcap").records.size(), 10u);
    EXPECT_THROW(parse_capture_format("pcapng"), ConfigError);
}

} // namespace
