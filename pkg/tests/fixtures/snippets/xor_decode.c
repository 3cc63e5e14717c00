void decode(unsigned char *buf, int n, unsigned char key) {
    for (int i = 0; i < n; i++)
        buf[i] ^= key;
}
unsigned char payload[] = { 0x4d, 0x5a, 0x90, 0x00 };
