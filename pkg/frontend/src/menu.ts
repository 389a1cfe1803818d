/** The main menu: eight fixed options, in this exact order. */

export const MAIN_MENU = [
  "Pay Over The Counter",
  "Account To Account Transfer",
  "Cash Withdrawal",
  "Cash Deposit",
  "Add Customer",
  "Verify Account",
  "Verify PIN",
  "Cancel Transaction",
] as const;

export type MenuOption = (typeof MAIN_MENU)[number];

/** The four options that drive a full money transaction. */
export type TransactionOption =
  | "Pay Over The Counter"
  | "Account To Account Transfer"
  | "Cash Withdrawal"
  | "Cash Deposit";

/** Wire selector for the EnterAmount "Workflow" extras key. */
export const WORKFLOW_SELECTOR: Record<TransactionOption, string> = {
  "Pay Over The Counter": "Pay Over The Counter",
  "Account To Account Transfer": "Transaction Account To Account",
  "Cash Withdrawal": "Cash Withdrawal",
  "Cash Deposit": "Cash Deposit",
};

/** Options that move or touch money via the inserted card; these stay
 * disabled until the card tray reports mutual authentication. */
export const CARD_BOUND = new Set<MenuOption>([
  "Pay Over The Counter",
  "Account To Account Transfer",
  "Cash Withdrawal",
  "Cash Deposit",
  "Cancel Transaction",
  "Verify PIN",
]);

/** Admin sees all eight options; everyone else loses Add Customer. */
export function visibleMenu(isAdmin: boolean): MenuOption[] {
  return isAdmin ? [...MAIN_MENU] : MAIN_MENU.filter((o) => o !== "Add Customer");
}
