/** Exact decimal rendering of raw amounts; no floating point anywhere. */

const RAW_PER_XNO = 10n ** 30n;

export function rawToXno(raw: string): string {
  if (!/^\d+$/.test(raw)) throw new Error(`not a raw amount: ${raw}`);
  const value = BigInt(raw);
  const whole = value / RAW_PER_XNO;
  const frac = value % RAW_PER_XNO;
  if (frac === 0n) return whole.toString();
  const fracText = frac.toString().padStart(30, '0').replace(/0+$/, '');
  return `${whole}.${fracText}`;
}

export function looksLikeAddress(text: string): boolean {
  return /^(nano|xrb)_[13456789abcdefghijkmnopqrstuwxyz]{60}$/.test(text.trim());
}
