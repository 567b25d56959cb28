/*
 * mvexport: decode a video with libavcodec and stream per-frame luma planes
 * plus exported motion-vector side data as a simple binary format on stdout.
 *
 * Output (little-endian):
 *   magic "MVX1"; codec name, 32 bytes NUL-padded; width i32; height i32
 *   then per decoded frame (presentation order):
 *     pict u8 ('I','P','B' or '?'); key u8; reserved u16
 *     mv_count i32
 *     width*height luma bytes
 *     mv_count x { source i32; w i32; h i32; dst_x i32; dst_y i32;
 *                  motion_x i32; motion_y i32; motion_scale i32 }
 *
 * Usage: mvexport <input> [max_frames]
 */

#include <libavcodec/avcodec.h>
#include <libavformat/avformat.h>
#include <libavutil/motion_vector.h>
#include <libavutil/pixdesc.h>
#include <stdint.h>
#include <stdio.h>
#include <string.h>

static int write_i32(FILE *out, int32_t v) {
    uint8_t b[4] = {v & 0xff, (v >> 8) & 0xff, (v >> 16) & 0xff, (v >> 24) & 0xff};
    return fwrite(b, 1, 4, out) == 4 ? 0 : -1;
}

static int emit_frame(FILE *out, const AVFrame *frame, int width, int height) {
    const AVFrameSideData *sd = av_frame_get_side_data(frame, AV_FRAME_DATA_MOTION_VECTORS);
    int32_t mv_count = sd ? (int32_t)(sd->size / sizeof(AVMotionVector)) : 0;

    uint8_t head[4];
    head[0] = (uint8_t)av_get_picture_type_char(frame->pict_type);
    head[1] = frame->key_frame ? 1 : 0;
    head[2] = 0;
    head[3] = 0;
    if (fwrite(head, 1, 4, out) != 4) return -1;
    if (write_i32(out, mv_count)) return -1;

    for (int y = 0; y < height; y++) {
        if (fwrite(frame->data[0] + (ptrdiff_t)y * frame->linesize[0], 1, width, out) !=
            (size_t)width)
            return -1;
    }

    const AVMotionVector *mv = sd ? (const AVMotionVector *)sd->data : NULL;
    for (int32_t i = 0; i < mv_count; i++) {
        if (write_i32(out, mv[i].source) || write_i32(out, mv[i].w) || write_i32(out, mv[i].h) ||
            write_i32(out, mv[i].dst_x) || write_i32(out, mv[i].dst_y) ||
            write_i32(out, mv[i].motion_x) || write_i32(out, mv[i].motion_y) ||
            write_i32(out, mv[i].motion_scale))
            return -1;
    }
    return 0;
}

int main(int argc, char **argv) {
    if (argc < 2) {
        fprintf(stderr, "usage: mvexport <input> [max_frames]\n");
        return 2;
    }
    long max_frames = argc > 2 ? atol(argv[2]) : 0;

    AVFormatContext *fmt = NULL;
    if (avformat_open_input(&fmt, argv[1], NULL, NULL) < 0) {
        fprintf(stderr, "mvexport: cannot open %s\n", argv[1]);
        return 3;
    }
    if (avformat_find_stream_info(fmt, NULL) < 0) {
        fprintf(stderr, "mvexport: no stream info in %s\n", argv[1]);
        return 3;
    }
    int vidx = av_find_best_stream(fmt, AVMEDIA_TYPE_VIDEO, -1, -1, NULL, 0);
    if (vidx < 0) {
        fprintf(stderr, "mvexport: no video stream in %s\n", argv[1]);
        return 3;
    }
    AVStream *st = fmt->streams[vidx];
    const AVCodec *dec = avcodec_find_decoder(st->codecpar->codec_id);
    if (!dec) {
        fprintf(stderr, "mvexport: no decoder for codec id %d\n", st->codecpar->codec_id);
        return 4;
    }
    AVCodecContext *ctx = avcodec_alloc_context3(dec);
    avcodec_parameters_to_context(ctx, st->codecpar);
    AVDictionary *opts = NULL;
    av_dict_set(&opts, "flags2", "+export_mvs", 0);
    if (avcodec_open2(ctx, dec, &opts) < 0) {
        fprintf(stderr, "mvexport: cannot open decoder %s\n", dec->name);
        return 4;
    }

    FILE *out = stdout;
    int wrote_header = 0;
    int width = 0, height = 0;
    long n = 0;
    int rc = 0;

    AVPacket *pkt = av_packet_alloc();
    AVFrame *frame = av_frame_alloc();

    int draining = 0;
    while (!rc) {
        if (!draining) {
            int r = av_read_frame(fmt, pkt);
            if (r < 0) {
                draining = 1;
                avcodec_send_packet(ctx, NULL);
            } else if (pkt->stream_index != vidx) {
                av_packet_unref(pkt);
                continue;
            } else {
                avcodec_send_packet(ctx, pkt);
                av_packet_unref(pkt);
            }
        }
        for (;;) {
            int r = avcodec_receive_frame(ctx, frame);
            if (r == AVERROR(EAGAIN)) break;
            if (r == AVERROR_EOF) {
                rc = 1;
                break;
            }
            if (r < 0) {
                fprintf(stderr, "mvexport: decode error\n");
                return 5;
            }
            const AVPixFmtDescriptor *desc = av_pix_fmt_desc_get(frame->format);
            if (!desc || desc->comp[0].depth != 8 ||
                (desc->flags & (AV_PIX_FMT_FLAG_RGB | AV_PIX_FMT_FLAG_PAL))) {
                fprintf(stderr, "mvexport: unsupported pixel format %s\n",
                        desc ? desc->name : "?");
                return 5;
            }
            if (!wrote_header) {
                width = frame->width;
                height = frame->height;
                char name[32];
                memset(name, 0, sizeof(name));
                snprintf(name, sizeof(name), "%s", dec->name);
                fwrite("MVX1", 1, 4, out);
                fwrite(name, 1, sizeof(name), out);
                write_i32(out, width);
                write_i32(out, height);
                wrote_header = 1;
            }
            if (frame->width != width || frame->height != height) {
                fprintf(stderr, "mvexport: mid-stream size change\n");
                return 5;
            }
            if (emit_frame(out, frame, width, height)) {
                fprintf(stderr, "mvexport: write failed\n");
                return 6;
            }
            n++;
            if (max_frames > 0 && n >= max_frames) {
                rc = 1;
                break;
            }
        }
        if (draining && !rc) {
            /* decoder drained without EOF frame; stop anyway */
            rc = 1;
        }
    }

    fflush(out);
    if (!wrote_header) {
        fprintf(stderr, "mvexport: no decodable video frames in %s\n", argv[1]);
        return 5;
    }
    fprintf(stderr, "mvexport: %ld frames, codec %s, %dx%d\n", n, dec->name, width, height);
    return 0;
}
