#ifndef BUFFER_H
#define BUFFER_H

#include <stddef.h>

struct buffer {
    char *data;
    size_t len;
    size_t cap;
};

extern int buffer_debug;

int buffer_reserve(struct buffer *b, size_t want);

static inline int buffer_full(const struct buffer *b)
{
    return b->len == b->cap;
}

#endif
