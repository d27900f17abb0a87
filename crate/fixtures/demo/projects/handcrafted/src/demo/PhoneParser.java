package demo;

import java.util.regex.Matcher;
import java.util.regex.Pattern;

public class PhoneParser {
    String areaCode(Pattern phone, String input) {
        Matcher m = phone.matcher(input);
        return m.group(1) + "-" + m.group(2);
    }
}
