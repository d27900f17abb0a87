package demo;

public class Describer {
    String describe(Object item) {
        String text = String.valueOf(item);
        if (text != null) {
            return text.trim();
        }
        return "";
    }
}
