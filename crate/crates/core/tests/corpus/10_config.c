#include <string.h>

static const char *defaults[] = {
    "verbose",
    "color",
};

int lookup_flag(const char *name)
{
    int idx = -1;
    for (int i = 0; i < 2; i++) {
        if (strcmp(defaults[i], name) == 0) {
            idx = i;
            break;
        }
    }
    return idx;
}

int parse_level(const char *s)
{
    switch (s[0]) {
    case 'h':
        return 2;
    case 'l':
        return 0;
    }
    return 1;
}
