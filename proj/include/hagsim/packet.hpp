#pragma once

#include <cstdint>
#include <string>

#include "hagsim/sim_time.hpp"

namespace hagsim {

// Fixed per-segment header overhead; a 1500-byte data frame carries 1440
// payload bytes. ACKs are headers only and still consume reverse-path
// capacity and queue space.
inline constexpr std::uint32_t kHeaderBytes = 60;
inline constexpr std::uint32_t kAckBytes = 60;

enum class PacketKind : std::uint8_t { handshake, setup, data, ack, control };

inline const char* to_string(PacketKind k) {
    switch (k) {
        case PacketKind::handshake: return "handshake";
        case PacketKind::setup: return "setup";
        case PacketKind::data: return "data";
        case PacketKind::ack: return "ack";
        case PacketKind::control: return "control";
    }
    return "?";
}

// Direction of the byte stream a packet belongs to. ACKs for a stream
// travel on the opposite wire direction but keep the stream's tag.
enum class StreamDir : std::uint8_t { client_to_server = 0, server_to_client = 1 };

inline StreamDir reverse(StreamDir d) {
    return d == StreamDir::client_to_server ? StreamDir::server_to_client
                                            : StreamDir::client_to_server;
}

struct Packet {
    std::uint64_t flow_id = 0;
    int subflow_id = -1;
    StreamDir dir = StreamDir::client_to_server;
    PacketKind kind = PacketKind::data;

    std::uint64_t conn_seq = 0; // connection-level byte offset of payload
    std::uint64_t sf_seq = 0;   // subflow-level byte offset
    std::uint32_t size_bytes = 0;
    std::uint32_t payload_bytes = 0;
    bool retransmit = false;
    SimTime sent_at = SimTime::zero();

    // ACK-only fields: which subflow segment is being acknowledged.
    std::uint64_t ack_sf_seq = 0;
    std::uint32_t ack_payload = 0;
    std::uint64_t conn_cum_ack = 0;
    SimTime echo_sent_at = SimTime::zero();
    bool ack_of_retransmit = false;

    // Handshake/control subtype (SYN, SYN-ACK, ADD_ADDR, JOIN...).
    std::uint8_t ctrl = 0;
};

} // namespace hagsim
