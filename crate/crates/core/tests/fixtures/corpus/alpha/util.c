# 1 "util.c"
unsigned hash_bytes(const char *p, unsigned len)
{
    unsigned h = 2166136261u;
    while (len--) {
        h = (h ^ (unsigned char)*p++) * 16777619u;
    }
    return h;
}

int is_power_of_two(unsigned x)
{
    return x && !(x & (x - 1));
}
