//! Walks the converter models: the RF digipot ladder, both current-DAC
//! presets, the VREF DAC, and the oversampling ADC's noise behavior.

use ppg_afe_sim::converters::{AdcSpec, IdacSpec, QuantizerSpec, Transfer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let rf = QuantizerSpec::linear(8, 3.9e3, 1e6);
    println!("RF digipot (8-bit, 3.9 kOhm .. 1 MOhm):");
    for code in [0u32, 1, 64, 128, 254, 255] {
        println!("  code {code:>3} -> {:>10.1} Ohm", rf.value_clamped(code));
    }

    println!("\niDAC presets:");
    for (name, idac) in [
        ("full-range linear 8-bit", IdacSpec::full_range(Transfer::Linear)),
        ("full-range reciprocal 8-bit", IdacSpec::full_range(Transfer::Reciprocal)),
        ("SoC 7-bit 1..128 uA", IdacSpec::soc_7bit()),
    ] {
        let max_code = idac.quant.max_code();
        println!(
            "  {name:<28} code 0 -> {:>10.4e} A, code {max_code} -> {:>10.4e} A",
            idac.current(0),
            idac.current(max_code)
        );
        let target = 50e-6;
        let code = idac.code_for(target);
        println!(
            "    closest code to 50 uA: {code} ({:.4e} A, error {:+.2e} A)",
            idac.current(code),
            idac.current(code) - target
        );
    }

    println!("\nADC oversampling (12-bit base, noise 2 LSB rms, 4000 conversions):");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let input = 1.2345;
    for oversample in [1u32, 4, 16, 64, 256] {
        let adc = AdcSpec::new(12, oversample, 3.3);
        let noise = 2.0 * adc.base_lsb();
        let codes: Vec<f64> =
            (0..4000).map(|_| adc.sample(input, noise, &mut rng) as f64).collect();
        let mean = codes.iter().sum::<f64>() / codes.len() as f64;
        let var = codes.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>()
            / (codes.len() - 1) as f64;
        println!(
            "  x{oversample:<3} -> {:>2} effective bits, conversion noise std {:.1} uV",
            adc.effective_bits(),
            var.sqrt() * adc.effective_lsb() * 1e6
        );
    }
}
