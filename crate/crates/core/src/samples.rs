//! Embedded sample programs, handy for demos and tests.

/// An app that derives an AES key, encrypts with a mode-less transformation
/// (so ECB is applied by default), and ships the ciphertext to both an HTTP
/// endpoint and a local file.
pub fn encrypt_send_save() -> &'static str {
    include_str!("../data/samples/encrypt_send_save.ceir.json")
}
